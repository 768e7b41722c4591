"""Numerical toolkit for Kakeya-type constructions: tube fans and books, exact
and Monte Carlo union measures, box-counting dimension, and lift/projection
experiments."""

from .box_dimension import (
    BoxCountSeries,
    DimensionFit,
    SegmentSet,
    box_count,
    box_count_series,
    dimension_fit,
    lattice_count,
)
from .certificates import book_bound_certificate, lemma_L1_certificate, slab_certificate
from .constructions import (
    KakeyaBook,
    PlacementSpec,
    adversarial_search,
    build_book,
    build_fan,
    build_slab_fan,
    build_unit_ball_book,
)
from .errors import (
    ArgumentError,
    CapacityError,
    ConfigError,
    DimensionError,
    EmptySelectionError,
    FormatError,
    GeometryError,
    InconclusiveError,
    KakeyaError,
    NearParallelError,
    ParallelError,
)
from .geometry import (
    Direction,
    GrassmannElement,
    Hyperplane,
    PageFamily,
    Segment,
    Tube,
    line_hyperplane_intersection,
    page_at,
    principal_angles,
    spherical_distance,
)
from .intersection import (
    ConvexPolygon,
    clip,
    linearized_pair_bound,
    pairwise_bound,
    polygon_area,
    slab_intersection_area,
    tube_pair_intersection_area_2d,
)
from .lift_project import (
    DirectionSet,
    LiftRecord,
    RearrangementReport,
    gamma0,
    lift_family,
    perturb_gamma,
    project_family,
    restrict_directions,
    spaghetti_check,
)
from .union_measure import (
    MeasureEstimate,
    TubeFamily,
    bonferroni_lower_bound,
    exact_union_area_2d,
    monte_carlo_union_volume,
)

__version__ = "0.1.0"
