"""Custom exceptions for torus, jump and equilibrium computations.

Every failure family carries an ``exit_code`` so the CLI handler can map it
without knowing the individual error types:

    1  I/O and configuration problems
    2  certification failures (Diophantine cutoff, divisors, bad input data)
    3  degeneracy (twist, nondegeneracy matrices, geometry)
    4  divergence of an iterative scheme
"""

from typing import Optional


class PyBeltramiError(Exception):
    """Base exception for all pybeltrami errors."""

    exit_code = 1


class DataError(PyBeltramiError):
    """Input or output data could not be read, written or understood."""

    exit_code = 1


class IOFormatError(DataError):
    """Malformed coefficient, jet or manifest file."""

    pass


class ConfigError(DataError):
    """Invalid run configuration (unknown section or key, bad value)."""

    pass


class CertificationError(PyBeltramiError):
    """A frequency or divisor certificate failed."""

    exit_code = 2


class NotDiophantineUpToCutoff(CertificationError):
    """Raised when |k·ω| < γ|k|^(-τ) for some checked integer vector k."""

    def __init__(self, k: Optional[tuple[int, int]], message: Optional[str] = None):
        self.k = k
        if message is None:
            message = f"frequency is not Diophantine up to cutoff: violating k={k}"
        super().__init__(message)


class DivisorUnderflow(CertificationError):
    """Raised when a retained mode has |k·ω| below the configured floor."""

    def __init__(self, k: tuple[int, int], divisor: float, floor: float):
        self.k = k
        self.divisor = divisor
        self.floor = floor
        super().__init__(f"small divisor |k·ω|={divisor:.3e} below floor {floor:.1e} at k={k}")


class DegeneracyError(PyBeltramiError):
    """A nondegeneracy certificate (twist, M, type II) is too small."""

    exit_code = 3


class TwistTooSmall(DegeneracyError):
    """Twist constant below the configured floor."""

    def __init__(self, twist: float, floor: float):
        self.twist = twist
        super().__init__(f"twist constant |T|={abs(twist):.3e} below floor {floor:.1e}")


class MFloorViolated(DegeneracyError):
    """Averaged Hamilton–Jacobi matrix is (numerically) singular."""

    def __init__(self, det: float, floor: float):
        self.det = det
        super().__init__(f"|det M|={abs(det):.3e} below matrix floor {floor:.1e}")


class TypeIIDegenerate(DegeneracyError):
    """Type-II certificate below floor; no harmonic exterior torus available."""

    def __init__(self, value: float, floor: float):
        self.value = value
        super().__init__(f"type-II value {value:.3e} below floor {floor:.1e}")


class DegenerateAlpha(DegeneracyError):
    """The tangential solve B×n = DK α is singular or inconsistent."""

    def __init__(self, message="tangential 2x2 solve for alpha is singular"):
        super().__init__(message)


class DegenerateWeight(DegeneracyError):
    """Weight function with (near) zero mean in a free-mean solve."""

    def __init__(self, mean: float):
        self.mean = mean
        super().__init__(f"weight mean {mean:.3e} too small for free-mean solve")


class ForbiddenEigenvalue(DegeneracyError):
    """Requested λ too close to the value that annihilates the new twist."""

    def __init__(self, lam: float, forbidden: float, gap: float):
        self.lam = lam
        self.forbidden = forbidden
        super().__init__(
            f"lambda={lam:.6g} within guard band {gap:.3e} of forbidden value {forbidden:.6g}"
        )


class DivergenceError(PyBeltramiError):
    """An iterative scheme failed to converge."""

    exit_code = 4


class DivergenceDetected(DivergenceError):
    """Error increased between two Newton iterates."""

    def __init__(self, iteration: int, old_err: float, new_err: float):
        self.iteration = iteration
        super().__init__(
            f"error increased at iteration {iteration}: {old_err:.3e} -> {new_err:.3e}"
        )


class MaxIterExceeded(DivergenceError):
    """Iteration budget exhausted before reaching tolerance."""

    def __init__(self, max_iter: int, err: float):
        self.err = err
        super().__init__(f"no convergence in {max_iter} iterations (err={err:.3e})")


class NoConvergence(DivergenceError):
    """Hamilton–Jacobi solve did not converge; carries the residual history."""

    def __init__(self, history: list[float]):
        self.history = list(history)
        last = self.history[-1] if self.history else float("nan")
        super().__init__(f"Hamilton-Jacobi solve did not converge (last residual {last:.3e})")


class GridResolutionError(DivergenceError):
    """Coefficient tail stays above threshold after the allowed refinement."""

    def __init__(self, tail: float, grid: tuple[int, int]):
        self.tail = tail
        super().__init__(f"coefficient tail {tail:.3e} unresolved on grid {grid[0]}x{grid[1]}")


class NonzeroMean(ValueError):
    """Right-hand side of a cohomological equation has nonzero mean."""

    exit_code = 2

    def __init__(self, mean: float = float("nan")):
        self.mean = mean
        super().__init__(f"cohomological right-hand side has nonzero mean {mean:.3e}")


class NotDiffeomorphism(ValueError):
    """id + v is not orientation preserving at some grid node."""

    exit_code = 3

    def __init__(self, message="det(I + Dv) <= 0 at a grid node: not a diffeomorphism"):
        super().__init__(message)


class GeometryError(ValueError):
    """Invalid geometric input (radii, immersion, curvature)."""

    exit_code = 3

    def __init__(self, message="invalid geometry"):
        super().__init__(message)


class SelfIntersection(GeometryError):
    """Tube around a closed curve overlaps itself."""

    def __init__(self, message="tube overlaps itself"):
        super().__init__(message)


class LeftNeighborhood(ValueError):
    """Traced field line drifted away from the torus."""

    exit_code = 3

    def __init__(self, distance: float, tolerance: float):
        self.distance = distance
        super().__init__(f"field line left the torus: distance {distance:.3e} > {tolerance:.1e}")


class ConstraintViolated(ValueError):
    """Cauchy datum does not have a closed dual 1-form."""

    exit_code = 2

    def __init__(self, residual: float, tolerance: float):
        self.residual = residual
        super().__init__(f"closedness residual {residual:.3e} exceeds {tolerance:.1e}")


class FocalPoint(ValueError):
    """Normal chart collapses (t_max beyond the focal distance)."""

    exit_code = 3

    def __init__(self, message="normal chart reaches a focal point"):
        super().__init__(message)


class OutOfValidity(ValueError):
    """Jet evaluated outside its validity interval."""

    exit_code = 2

    def __init__(self, t: float, t_range: tuple[float, float]):
        self.t = t
        super().__init__(f"t={t:.3e} outside jet validity range {t_range}")


class ResidualAboveTolerance(CertificationError):
    """A post-check residual of a finished computation exceeds its tolerance."""

    def __init__(self, name: str, value: float, tolerance: float):
        self.name = name
        self.value = value
        super().__init__(f"{name} residual {value:.3e} above tolerance {tolerance:.1e}")
