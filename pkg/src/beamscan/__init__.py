"""Phased-array blockage measurement simulator and CP/PCA analysis chain."""

__version__ = "0.1.0"

from .channel import (
    ArrayConfig,
    BlockageEvent,
    BlockageTrajectory,
    GroundTruth,
    PathSpec,
    Scenario,
    array_response,
    make_codebook,
    scan_schedule,
    simulate,
)
from .decomposition import (
    AlsOptions,
    CpModel,
    PcaModel,
    align_components,
    fit_vs_rank,
    free_parameters,
    interleave,
    parafac,
    pca,
    power_matrix,
)
from .numerics import SvdFactors, lstsq, svd
from .scenarios import load_scenario, preset
from .segmentation import BlockageState, SegmentOptions, segment_blockage
from .tensor import (
    ChannelTensor,
    cp_reconstruct,
    frobenius_norm,
    khatri_rao,
    read_ctns,
    refold,
    unfold,
    write_ctns,
)
