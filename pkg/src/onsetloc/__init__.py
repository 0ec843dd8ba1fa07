"""Multi-speaker DOA estimation with onset-encoded multichannel cross-correlation (Onset-MCCC)
and MCC-PHAT, plus a stochastic-room simulator and evaluation tools."""

from .doa import SteeredResponseMap, pick_doas
from .filterbank import GammatoneBank, decompose, design_bank
from .mccc import OnsetMcccConfig, onset_mccc_map
from .mccphat import MccPhatConfig, gcc_phat, mcc_phat_map
from .signal import ArrayGeometry, MultichannelSignal, SteeringGrid, read_wav, write_wav

__all__ = [
    "ArrayGeometry", "GammatoneBank", "MccPhatConfig", "MultichannelSignal", "OnsetMcccConfig",
    "SteeredResponseMap", "SteeringGrid", "decompose", "design_bank", "gcc_phat", "mcc_phat_map",
    "onset_mccc_map", "pick_doas", "read_wav", "write_wav",
]
