"""Rearrangements, K-functionals, and reverse-Hölder classes on dyadic grids.

The package computes, for weights discretized on dyadic grids over the unit
cube in dimension 1 or 2:

* decreasing rearrangements and dyadic maximal functions (`rearrange`),
* K-functional curves for the couples (L1, Linf) and (Lp, Linf), Holmstedt
  composites, Lorentz and L log L norms, the extrapolation-space norm, and
  weighted-pair K-functional estimates via packings (`kcalc`),
* almost-increasing indices of curve families with bracketing certificates
  (`indices`),
* reverse-Hölder / Muckenhoupt class constants and the verification
  routines for the equivalences between their definitions (`weights`),
* a CLI driving all of it (`rhlab` console script, `cli`).

All randomness is counter-based and seeded, all cube sums are exact, and
every report is byte-reproducible regardless of thread count.
"""

from .grid import (
    CubeFamily,
    DyadicCube,
    WeightFormatError,
    WeightGrid,
    WeightSpecError,
    base_cube,
    enumerate_cubes,
    integrate,
    level_cubes,
    load_weight,
    make_grid,
    parse_cube,
    save_weight,
)
from .rearrange import (
    DecreasingStep,
    double_star,
    dyadic_maximal,
    iterated_maximal,
    rearrangement,
)
from .kcalc import (
    ConcaveCurve,
    CurveFamily,
    HolmstedtCurve,
    LpKCurve,
    PackedFunction,
    PackingFamily,
    StepProductCurve,
    WeightedKEstimate,
    extrapolation_norm,
    grid_power,
    holmstedt_curve,
    k_l1_linf,
    k_lorentz_linf,
    k_lp_linf,
    k_weighted,
    llogl_integral_forms,
    llogl_norm,
    lorentz_norm,
    packing_average,
    packing_family,
    power_piece_integral,
)
from .indices import (
    AiConstant,
    IndexEstimate,
    acks_index,
    ai_constant,
    family_index,
    hardy_residual,
    samko_alpha,
    single_index,
)
from .weights import (
    ClassConstant,
    GehringResult,
    TheoremReport,
    a_p_constant,
    analyze_report,
    fujii_constant,
    gehring_improve,
    hardy_residual_sup,
    kside_rh_constant,
    rh_llogl_constant,
    rh_lorentz_constant,
    rh_p_constant,
    rh_p_weighted_constant,
    standard_corpus,
    verify_acks,
    verify_extrapolation_bound,
    verify_fujii,
    verify_herz,
    verify_llogl_equivalence,
    verify_packing,
    verify_rearrange_exact,
    verify_rhp_equivalence,
    verify_stromberg_wheeden,
    verify_weighted_rh,
    weak_type_residual,
)

__version__ = "0.1.0"

__all__ = [
    "AiConstant",
    "ClassConstant",
    "ConcaveCurve",
    "CubeFamily",
    "CurveFamily",
    "DecreasingStep",
    "DyadicCube",
    "GehringResult",
    "HolmstedtCurve",
    "IndexEstimate",
    "LpKCurve",
    "PackedFunction",
    "PackingFamily",
    "StepProductCurve",
    "TheoremReport",
    "WeightFormatError",
    "WeightGrid",
    "WeightSpecError",
    "WeightedKEstimate",
    "a_p_constant",
    "acks_index",
    "ai_constant",
    "analyze_report",
    "base_cube",
    "double_star",
    "dyadic_maximal",
    "enumerate_cubes",
    "extrapolation_norm",
    "family_index",
    "fujii_constant",
    "gehring_improve",
    "grid_power",
    "hardy_residual",
    "hardy_residual_sup",
    "holmstedt_curve",
    "integrate",
    "iterated_maximal",
    "k_l1_linf",
    "k_lorentz_linf",
    "k_lp_linf",
    "k_weighted",
    "kside_rh_constant",
    "level_cubes",
    "llogl_integral_forms",
    "llogl_norm",
    "load_weight",
    "lorentz_norm",
    "make_grid",
    "packing_average",
    "packing_family",
    "parse_cube",
    "power_piece_integral",
    "rearrangement",
    "rh_llogl_constant",
    "rh_lorentz_constant",
    "rh_p_constant",
    "rh_p_weighted_constant",
    "samko_alpha",
    "save_weight",
    "single_index",
    "standard_corpus",
    "verify_acks",
    "verify_extrapolation_bound",
    "verify_fujii",
    "verify_herz",
    "verify_llogl_equivalence",
    "verify_packing",
    "verify_rearrange_exact",
    "verify_rhp_equivalence",
    "verify_stromberg_wheeden",
    "verify_weighted_rh",
    "weak_type_residual",
]
