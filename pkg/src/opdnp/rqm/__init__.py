from .params import (RqmParams, STATE_LABELS, Q_LEVELS, D1_LEVELS, D0_LEVELS, RQM_PAIRS,
                     PRESETS, ANCOOT_SOISC, ANCOOT_RQM, JSCAN_XBAND, JSCAN_HIGHFIELD)
from .levels import DqLevelScheme, level_scheme, zfs_matrix_elements, excited_eigenbasis
from .rates import (RateTable, dq_rate_constants, selectivity_factor, rqm_polarization,
                    soisc_populations, slr_direct_scaling)
from .kinetics import (KineticState, build_kinetic_generator, evolve_kinetics,
                       d0_polarization_trace)
from .pumping import PumpingReduction, pumping_reduction
from .scan import j_scan
