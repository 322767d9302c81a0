"""Symbolic exterior calculus on chart models, with grid verification of
contact, confoliation, presymplectic and connection conditions and the
constructions built from them."""
from .construct import (
    DeformationResult,
    GlueConfig,
    GlueConfigError,
    RejectedInput,
    assemble_geodesible_demo,
    carriere_contact,
    confoliation_contactize,
    contactize,
    glue_open_book,
)
from .expr import BumpSpec, DomainError, ParseError
from .exterior import (
    Chart,
    KForm,
    SmoothMap,
    VecField,
    contract,
    d,
    exterior_derivative,
    lie_derivative,
    pullback,
    wedge,
)
from .manifold import (
    ChartComplex,
    Grid,
    HyperbolicityError,
    builtin_carriere,
    builtin_local_chart,
    builtin_t3_contact,
    builtin_trivial_open_book,
    check_descends,
)
from .pointwise import (
    DegenerateKernelError,
    NotContactError,
    form_rank,
    kernel_direction,
    reeb_of_contact,
)
from .report import VerificationReport
from .verify import (
    basic_exactness_witness,
    is_confoliation,
    is_connection,
    is_contact,
    is_presymplectic,
    is_presymplectic_confoliation,
    nontriviality_witness,
    orbit_integral,
)

__version__ = "0.1.0"

__all__ = [
    "DeformationResult",
    "GlueConfig",
    "GlueConfigError",
    "RejectedInput",
    "assemble_geodesible_demo",
    "carriere_contact",
    "confoliation_contactize",
    "contactize",
    "glue_open_book",
    "BumpSpec",
    "DomainError",
    "ParseError",
    "Chart",
    "KForm",
    "SmoothMap",
    "VecField",
    "contract",
    "d",
    "exterior_derivative",
    "lie_derivative",
    "pullback",
    "wedge",
    "ChartComplex",
    "Grid",
    "HyperbolicityError",
    "builtin_carriere",
    "builtin_local_chart",
    "builtin_t3_contact",
    "builtin_trivial_open_book",
    "check_descends",
    "DegenerateKernelError",
    "NotContactError",
    "form_rank",
    "kernel_direction",
    "reeb_of_contact",
    "VerificationReport",
    "basic_exactness_witness",
    "is_confoliation",
    "is_connection",
    "is_contact",
    "is_presymplectic",
    "is_presymplectic_confoliation",
    "nontriviality_witness",
    "orbit_integral",
]
