"""Random-matrix spectral laboratory.

Sampling of i.i.d. subgaussian square matrices, exact spectral identities,
restricted-invertibility subset selection, the bottom singular frame and
its inequality chain, and Monte Carlo tail estimation with exponent fits.
"""
from .ensembles import EntryDistribution, MatrixSample, sample_matrix, subgaussian_bound
from .montecarlo import (
    ExponentFit, StatisticSpec, TailEstimate, distance_concentration, estimate_tail,
    estimate_tails, fit_quadratic_exponent, operator_norm_tail,
)
from .prooftrace import BottomFrame, ProofTrace, bottom_frame, count_good_subsets, trace_chain
from .rii import (
    SubsetCertificate, brute_force_subset_oracle, select_invertible_subset, verify_certificate,
)
from .spectra import (
    SpectralSummary, distance_to_span, leave_one_out_distances, negative_second_moment_residual,
    spectral_summary,
)

__version__ = "0.1.0"
