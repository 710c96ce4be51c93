"""Lattice Nahm transform: twisted Dirac kernels, their bundle, connection and curvature."""

from .bundle import (
    GridTooCoarseError,
    KernelBundle,
    NahmConnection,
    NahmCurvature,
    PeriodicityResult,
    PicardGrid,
    PlusKernelError,
    RankJumpError,
    SliceComposite,
    composite_from_full,
    mean_curvature,
    nahm_bundle,
    nahm_connection,
    nahm_curvature,
    periodicity_check,
    slice_composite_curvature,
)
from .cache import CacheChecksumError, CacheFormatError, CacheVersionError, FrameCache, read_frames, write_frames
from .dirac import (
    DiracFamily,
    TwistedDirac,
    build_twisted_dirac,
    chirality_components,
    free_wilson_singular_values,
    naive_dispersion,
)
from .solvers import (
    GAP_MIN,
    EigensolverError,
    KernelFrame,
    LowestSingular,
    NoStableKernelError,
    detect_rank,
    kernel_frame,
    kernel_projector,
    lowest_singular,
    min_singular,
)
