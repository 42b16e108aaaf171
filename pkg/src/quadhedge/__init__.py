"""Variance-optimal discrete-time hedging of (barrier) options under
independent log returns: calibration of jump densities from return samples,
Fourier discretization of the period law, lattice valuation with exact
quadratic-risk accounting, Monte Carlo verification, and report builders."""

from .bsref import (BsParams, bgk_corrected_price, bs_uoc_continuous, bs_vanilla,
                    delta_to_level, gaussian_increment)
from .calibration import (CumulantFunction, LevyDensity, MarketParams,
                          PeriodMoments, ReturnSample, annualized_moments,
                          build_raw_levy, double_exponential_model, gaussian_model,
                          jump_diffusion_model, load_model, load_returns,
                          parse_returns, rescale, save_model)
from .distribution import (IncrementDistribution, InversionConfig, cdf, cdf_batch,
                           discretize, lattice_moments, load_distribution,
                           save_distribution)
from .engine import (HedgeReport, LatticeRun, OnePeriodCoefficients, UpAndOutCall,
                     backward_induct, coefficients, constant_claim_check,
                     error_accumulate, hedge_report)
from .errors import (ConfigError, DegenerateMeasureError, DegenerateSampleError,
                     EngineError, InversionError, QuadHedgeError)
from .mc import SimConfig, SimResult, brute_force_optimum, simulate_hedge
from .pricing import SharpeQuote, premium_ratio, sharpe_price
from .reports import (build_grid, grid_to_csv, grid_to_markdown, kurtosis_table,
                      kurtosis_to_markdown, premium_grid, premium_to_markdown,
                      run_manifest, scaling_study, scaling_to_csv,
                      scaling_to_markdown)

__version__ = "0.1.0"
