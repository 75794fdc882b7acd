"""Fixed power-prior borrowing of external binary-outcome controls.

The external binomial likelihood is raised to a fixed discount a0 in [0,1]
before being combined with a Beta prior and the trial likelihood, giving a
conjugate Beta posterior. Intended only when there is no marked doubt about
population comparability; the CLI gates on an explicit flag.
"""

from __future__ import annotations

from dataclasses import dataclass

from scipy.special import betainc

from .errors import ParameterOutOfRange


@dataclass(frozen=True)
class PowerPriorPosterior:
    a0: float
    prior_alpha: float
    prior_beta: float
    posterior_alpha: float
    posterior_beta: float
    effective_prior_n: float

    @property
    def mean(self) -> float:
        return self.posterior_alpha / (self.posterior_alpha + self.posterior_beta)

    def cdf(self, theta: float) -> float:
        if theta <= 0.0:
            return 0.0
        if theta >= 1.0:
            return 1.0
        return float(betainc(self.posterior_alpha, self.posterior_beta, theta))

    def quantile(self, q: float, tol: float = 1e-8) -> float:
        """Posterior quantile by bisection on the Beta CDF (tol in probability)."""
        if not 0.0 < q < 1.0:
            raise ParameterOutOfRange(f"quantile level {q} outside (0,1)")
        lo, hi = 0.0, 1.0
        # Bisect until the bracket pins the CDF to within tol.
        while hi - lo > 1e-15 and self.cdf(hi) - self.cdf(lo) > tol:
            mid = 0.5 * (lo + hi)
            if self.cdf(mid) < q:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def credible_interval(self, level: float = 0.95) -> tuple[float, float]:
        """Equal-tailed posterior credible interval."""
        if not 0.0 < level < 1.0:
            raise ParameterOutOfRange(f"credible level {level} outside (0,1)")
        tail = (1.0 - level) / 2.0
        return self.quantile(tail), self.quantile(1.0 - tail)

    def to_dict(self, level: float = 0.95) -> dict:
        lo, hi = self.credible_interval(level)
        return {
            "a0": self.a0,
            "prior": [self.prior_alpha, self.prior_beta],
            "posterior": [self.posterior_alpha, self.posterior_beta],
            "effective_prior_n": self.effective_prior_n,
            "mean": self.mean,
            "level": level,
            "credible_interval": [lo, hi],
        }


def power_prior_posterior(
    x: int,
    n: int,
    x0: int,
    n0: int,
    a0: float,
    prior_alpha: float = 1.0,
    prior_beta: float = 1.0,
) -> PowerPriorPosterior:
    """Conjugate Beta posterior with the external likelihood discounted by a0.

    Parameters
    ----------
    x, n : int
        Trial responders and sample size.
    x0, n0 : int
        External responders and sample size.
    a0 : float
        Discount in [0,1]; 0 discards the external data, 1 pools fully.
    prior_alpha, prior_beta : float
        Beta prior hyperparameters, both > 0.
    """
    if not 0 <= x <= n:
        raise ParameterOutOfRange(f"trial counts x={x}, n={n} invalid")
    if not 0 <= x0 <= n0:
        raise ParameterOutOfRange(f"external counts x0={x0}, n0={n0} invalid")
    if not 0.0 <= a0 <= 1.0:
        raise ParameterOutOfRange(f"a0={a0} outside [0,1]")
    if prior_alpha <= 0 or prior_beta <= 0:
        raise ParameterOutOfRange("prior hyperparameters must be > 0")
    return PowerPriorPosterior(
        a0=a0,
        prior_alpha=prior_alpha,
        prior_beta=prior_beta,
        posterior_alpha=prior_alpha + x + a0 * x0,
        posterior_beta=prior_beta + (n - x) + a0 * (n0 - x0),
        effective_prior_n=a0 * n0,
    )


def a0_sensitivity(
    x: int,
    n: int,
    x0: int,
    n0: int,
    grid,
    prior_alpha: float = 1.0,
    prior_beta: float = 1.0,
    level: float = 0.95,
) -> list[dict]:
    """Posterior summaries over a grid of discount values (no selection rule)."""
    return [
        power_prior_posterior(x, n, x0, n0, a0, prior_alpha, prior_beta).to_dict(level)
        for a0 in grid
    ]
