"""Phase-space symbol calculus, truncated quantization and time-sliced propagators."""

__version__ = "0.1.0"

from .phase_grid import AliasingError, PhaseGrid, PhasePoint, Symbol, inverse_symplectic_fourier, symplectic_fourier
from .omega import OrderingRule, ZeroSetViolation, convert_symbol, estimate_order, omega_factor, omega_product
from .polynomial import PolySymbol
from .quantizer import (FockBasis, MonomialOp, OperatorMatrix, PositionBasis, TruncationError, dequantize,
                        quantize_function, quantize_monomial, quantize_symbol, trace_pairing)
from .evolution import (Hamiltonian, Partition, check_aptness, convergence_study, get_preset, product_integral,
                        symbol_convergence_study)
from .coherent import (CoherentState, FockSpace, WickSymbol, coherent_path_integral, gaussian_measure_moments,
                       normal_product_integral, weyl_wick_convert, wick_symbol_of)
