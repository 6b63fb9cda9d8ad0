"""Jacobi-based Chebyshev smoothers.

Four smoother families are provided:

``first``
    1st-kind Chebyshev acceleration on ``[lambda_min, lambda_max]`` with the
    default ``lambda_min = 0.1 * lambda_tilde``.
``first_opt_lambda``
    Same recurrence, with a tuned ``lambda_min`` multiplier.
``fourth``
    4th-kind Chebyshev acceleration (no ``lambda_min``).
``fourth_opt``
    4th-kind with step weights ``beta`` minimizing the two-level bound.
"""

from __future__ import annotations

import dataclasses
import functools
from dataclasses import dataclass

import numpy as np

from .discretization import LinearOperator

FIRST = "first"
FIRST_OPT = "first_opt_lambda"
FOURTH = "fourth"
FOURTH_OPT = "fourth_opt"
FAMILIES = (FIRST, FIRST_OPT, FOURTH, FOURTH_OPT)
FIRST_KIND = (FIRST, FIRST_OPT)
FOURTH_KIND = (FOURTH, FOURTH_OPT)

# Optimized 4th-kind step weights, BETA_TABLE[k] = (beta_1, ..., beta_k).
BETA_TABLE_VERSION = "1"
BETA_TABLE = {
    1: (1.12500000000000,),
    2: (1.02387287570313, 1.26408905371085),
    3: (1.00842544782028, 1.08867839208730, 1.33753125909618),
    4: (1.00391310427285, 1.04035811188593, 1.14863498546254, 1.38268869241000),
    5: (1.00212930146164, 1.02173711549260, 1.07872433192603, 1.19810065292663,
        1.41322542791682),
    6: (1.00128517255940, 1.01304293035233, 1.04678215124113, 1.11616489419675,
        1.23829020218444, 1.43524297106744),
    7: (1.00083464397912, 1.00843949430122, 1.03008707768713, 1.07408384092003,
        1.15036186707366, 1.27116474046139, 1.45186658649364),
    8: (1.00057246631197, 1.00577427662415, 1.02050187922941, 1.05019803444565,
        1.10115572984941, 1.18086042806856, 1.29838585382576, 1.46486073151099),
    9: (1.00040960072832, 1.00412439506106, 1.01460212148266, 1.03561113626671,
        1.07139972529194, 1.12688273710962, 1.20785219140729, 1.32121930716746,
        1.47529642820699),
    10: (1.00030312229652, 1.00304840660796, 1.01077022715387, 1.02619011597640,
         1.05231724933755, 1.09255743207549, 1.15083376663972, 1.23172250870894,
         1.34060802024460, 1.48386124407011),
    11: (1.00023058595209, 1.00231675024028, 1.00817245396304, 1.01982986566342,
         1.03950210235324, 1.06965042700541, 1.11305754295742, 1.17290876275564,
         1.25288300576792, 1.35725579919519, 1.49101672564139),
    12: (1.00017947200828, 1.00180189139619, 1.00634861907307, 1.01537864566306,
         1.03056942830760, 1.05376019693943, 1.08699862592072, 1.13259183097913,
         1.19316273358172, 1.27171293675110, 1.37169337969799, 1.49708418575562),
    13: (1.00014241921559, 1.00142906932629, 1.00503028986298, 1.01216910518495,
         1.02414874342792, 1.04238158880820, 1.06842008128700, 1.10399010936759,
         1.15102748242645, 1.21171811910125, 1.28854264865128, 1.38432619380991,
         1.50229418757368),
    14: (1.00011490538261, 1.00115246376914, 1.00405357333264, 1.00979590573153,
         1.01941300472994, 1.03401425035436, 1.05480599606629, 1.08311420301813,
         1.12040891660892, 1.16833095655446, 1.22872122288238, 1.30365305707817,
         1.39546814053678, 1.50681646209583),
    15: (1.00009404750752, 1.00094291696343, 1.00331449056444, 1.00800294833816,
         1.01584236259140, 1.02772083317705, 1.04459535422831, 1.06750761206125,
         1.09760092545889, 1.13613855366157, 1.18452361426236, 1.24432087304475,
         1.31728069083392, 1.40536543893560, 1.51077872501845),
    16: (1.00007794828179, 1.00078126847253, 1.00274487974401, 1.00662291017015,
         1.01309858836971, 1.02289448329337, 1.03678321409983, 1.05559875719896,
         1.08024848405560, 1.11172607131497, 1.15112543431072, 1.19965584614973,
         1.25865841744946, 1.32962412656664, 1.41421360695576, 1.51427891730346),
}
BETA_TABLE_MAX_K = max(BETA_TABLE)

# optimized_beta(k) output (default settings) for orders past the table
BETA_EXTENDED = {
    17: (
        1.0000652876268814,
        1.0006546081078396,
        1.0022986497874031,
        1.0055431653202829,
        1.0109546630168846,
        1.0191297519973626,
        1.0307012647132305,
        1.0463482764993668,
        1.0668030199008374,
        1.092862045221924,
        1.1253942993964894,
        1.16535385451296,
        1.2137903065851654,
        1.2718608536927722,
        1.340847562585415,
        1.4221648081212412,
        1.5173886588861767,
    ),
    18: (
        1.0000553402172665,
        1.0005537413798022,
        1.0019445107055023,
        1.0046862069498983,
        1.009255836283835,
        1.0161499311708158,
        1.0258956262976067,
        1.0390516279666202,
        1.0562196782267537,
        1.07804719653942,
        1.1052367120473185,
        1.1385547911308047,
        1.1788357090737969,
        1.2269994018799195,
        1.284048952849717,
        1.35109620599486,
        1.4293552723236247,
        1.520177310722742,
    ),
    19: (
        1.0000472082151417,
        1.0004727851862452,
        1.0016593668453628,
        1.0039976635218786,
        1.0078911781138027,
        1.0137601439393258,
        1.022046210557161,
        1.033217276360396,
        1.0477715793834408,
        1.0662446233162735,
        1.0892121549541987,
        1.117298697724544,
        1.1511811554072495,
        1.1915979404935562,
        1.2393538688841252,
        1.2953296616586965,
        1.3604898139767152,
        1.4358906590865448,
        1.5226924914981426,
    ),
    20: (
        1.0000406797681232,
        1.0004067335340248,
        1.001427603870246,
        1.0034375074711055,
        1.006782934832245,
        1.0118202557315379,
        1.0189261417307127,
        1.0284935717287604,
        1.0409433928066147,
        1.0567205627909306,
        1.0763052674558797,
        1.1002119412095976,
        1.1289969562339877,
        1.1632637568633175,
        1.2036641741319605,
        1.2509130990531738,
        1.3057794575322919,
        1.3691155936610062,
        1.4418337604663114,
        1.5249521983988263,
    ),
    21: (
        1.0000351940075591,
        1.0003526042027626,
        1.0012367108036457,
        1.0029776561016728,
        1.0058724366103386,
        1.0102292842839857,
        1.0163687853140386,
        1.0246278278533538,
        1.0353615927584086,
        1.0489477023718972,
        1.065787933723036,
        1.0863135899434198,
        1.1109869801662746,
        1.1403063975762202,
        1.1748107231779152,
        1.2150812319120627,
        1.2617503435326467,
        1.315501964543827,
        1.37708139834974,
        1.4472956363582967,
        1.5270275278360137,
    ),
    22: (
        1.0000307898731613,
        1.0003074639141578,
        1.0010788860719972,
        1.002596113194045,
        1.0051190963816823,
        1.0089122836800652,
        1.01425485743273,
        1.0214341957819402,
        1.0307564596838248,
        1.042541560395909,
        1.057132472966145,
        1.074891946087025,
        1.0962087783614163,
        1.1215012405320304,
        1.1512160514435097,
        1.1858380906024448,
        1.2258848918997267,
        1.2719247975225436,
        1.3245586776312388,
        1.3844542096812182,
        1.4523151229765936,
        1.528926389915153,
    ),
    23: (
        1.000026948792077,
        1.0002699744838404,
        1.0009465126561634,
        1.0022777640027578,
        1.0044891285673736,
        1.0078135897349116,
        1.012491069430996,
        1.0187730864249656,
        1.0269217346534374,
        1.0372140115853292,
        1.0499416394432552,
        1.0654152153328613,
        1.0839646693707035,
        1.1059429038502175,
        1.1317266459680217,
        1.1617211440697435,
        1.1963608787053517,
        1.2361134435184948,
        1.2814832734854915,
        1.3330114819618697,
        1.3912873957842482,
        1.4569395096417066,
        1.5306564902711974,
    ),
    24: (
        1.0000237809468018,
        1.0002381803896814,
        1.0008350169673632,
        1.0020090830668897,
        1.003958539000089,
        1.0068875068307657,
        1.011006589744041,
        1.0165342650621807,
        1.0236994389932936,
        1.0327411282925933,
        1.0439121055902199,
        1.057478532664836,
        1.073724118630961,
        1.092948644299469,
        1.1154744094460147,
        1.1416416147851518,
        1.1718181657752327,
        1.2063970812656928,
        1.2457989252895378,
        1.2904766333152853,
        1.3409169276951063,
        1.3976439029146415,
        1.461220507416122,
        1.5322539226618477,
    ),
}
FOURTH_OPT_MAX_K = max(BETA_EXTENDED)


def beta_coefficients(k: int) -> tuple:
    """Tabulated optimized 4th-kind weights ``(beta_1, ..., beta_k)``, 1 <= k <= 16."""
    if k not in BETA_TABLE:
        raise ValueError(f"no tabulated beta for k={k}; valid range is 1..{BETA_TABLE_MAX_K}")
    return BETA_TABLE[k]


def fourth_kind_basis(k: int, lam) -> np.ndarray:
    """Scalar 4th-kind directions ``q_i(lam)`` with ``lambda_max = 1``.

    Row ``i`` holds the eigencomponent of ``d_i`` per unit initial error, so
    the residual polynomial is ``p_k(lam) = 1 - sum_i beta_{i+1} q_i(lam)``.
    """
    lam = np.asarray(lam, dtype=float)
    e = np.ones_like(lam)
    d = (4.0 / 3.0) * lam * e
    Q = [d]
    for i in range(1, k):
        e = e - d
        d = (2 * i - 1) / (2 * i + 3) * d + (8 * i + 4) / (2 * i + 3) * lam * e
        Q.append(d)
    return np.array(Q)


@functools.lru_cache(maxsize=None)
def optimized_beta(k: int, samples: int = 20000, iterations: int = 60) -> tuple:
    """Minimize ``sup lam p_k^2 / (1 - p_k^2)`` over 4th-kind step weights.

    ``p_k`` is linear in ``beta``; for a trial bound ``t`` the constraint
    ``|p_k(lam)| <= sqrt(t / (lam + t))`` on a sample grid is a linear
    feasibility problem, and ``t`` is bisected.  Reproduces the tabulated
    weights to about 1e-6 and is only used past the end of the table.
    """
    from scipy.optimize import linprog

    lam = np.concatenate([np.logspace(-8, -2, samples // 10, endpoint=False),
                          np.linspace(1e-2, 1.0, samples)])
    Q = fourth_kind_basis(k, lam)
    A_ub = np.vstack([-Q.T, Q.T])
    lo, hi = 1e-6, 1.0
    best = None
    for _ in range(iterations):
        t = np.sqrt(lo * hi)
        bound = np.sqrt(t / (lam + t))
        res = linprog(np.zeros(k), A_ub=A_ub, b_ub=np.concatenate([bound - 1, bound + 1]),
                      bounds=[(None, None)] * k, method="highs")
        if res.status == 0:
            hi, best = t, res.x
        else:
            lo = t
    if best is None:
        raise RuntimeError(f"beta optimization infeasible for k={k}")
    return tuple(float(b) for b in best)


def fourth_opt_betas(k: int) -> tuple:
    """Step weights used by the ``fourth_opt`` smoother of order ``k``.

    Tabulated for ``k <= 16``; precomputed :func:`optimized_beta` output
    for ``17 <= k <= 24``.
    """
    if k in BETA_TABLE:
        return BETA_TABLE[k]
    if k in BETA_EXTENDED:
        return BETA_EXTENDED[k]
    raise ValueError(f"fourth_opt supports 1 <= k <= {FOURTH_OPT_MAX_K}, got k={k}")


class JacobiSmoother:
    """Point-Jacobi base smoother ``S = scale * D^{-1}``."""

    def __init__(self, A: LinearOperator, scale: float = 1.0):
        diag = np.asarray(A.diagonal(), dtype=float)
        if not np.all(np.isfinite(diag)) or np.any(diag <= 0):
            raise ValueError("Jacobi smoother needs a positive finite diagonal")
        self.A = A
        self.scale = float(scale)
        self.inv_diag = self.scale / diag

    def apply(self, r):
        r = np.asarray(r, dtype=float)
        if r.ndim == 2:
            return self.inv_diag[:, None] * r
        return self.inv_diag * r

    __call__ = apply

    def apply_inverse(self, v):
        v = np.asarray(v, dtype=float)
        if v.ndim == 2:
            return v / self.inv_diag[:, None]
        return v / self.inv_diag

    def scaled(self, factor: float) -> "JacobiSmoother":
        return JacobiSmoother(self.A, self.scale * factor)


@dataclass(frozen=True)
class ChebyshevConfig:
    """Chebyshev smoother parameters.

    ``lambda_max = lambda_max_mult * lambda_tilde``; for the 1st-kind families
    ``lambda_min = lambda_min_mult * lambda_tilde``.
    """

    family: str = FOURTH
    k: int = 1
    lambda_tilde: float = 1.0
    lambda_max_mult: float = 1.1
    lambda_min_mult: float = 0.1
    betas: tuple | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown smoother family {self.family!r}")
        if self.k < 0:
            raise ValueError("k must be >= 0")
        if self.lambda_tilde <= 0:
            raise ValueError("lambda_tilde must be positive")
        if self.family in FIRST_KIND and not 0 < self.lambda_min < self.lambda_max:
            raise ValueError(
                f"need 0 < lambda_min < lambda_max, got ({self.lambda_min}, {self.lambda_max})")

    @property
    def lambda_max(self) -> float:
        return self.lambda_max_mult * self.lambda_tilde

    @property
    def lambda_min(self) -> float:
        return self.lambda_min_mult * self.lambda_tilde

    def with_order(self, k: int) -> "ChebyshevConfig":
        return dataclasses.replace(self, k=k)

    def step_weights(self) -> tuple:
        """``beta`` sequence for the 4th-kind families."""
        if self.betas is not None:
            if len(self.betas) != self.k:
                raise ValueError("explicit betas must have length k")
            return tuple(self.betas)
        if self.family == FOURTH:
            return (1.0,) * self.k
        if self.family == FOURTH_OPT:
            return fourth_opt_betas(self.k)
        raise ValueError(f"{self.family} has no step weights")


def _is_zero(x0):
    return x0 is None or not np.any(x0)


def cheb1_smooth(A, S, b, x0, cfg: ChebyshevConfig):
    """1st-kind Chebyshev smoothing, ``cfg.k`` steps.

    Costs ``k - 1`` applications of ``A`` when ``x0`` is zero (or ``None``)
    and ``k`` otherwise.
    """
    if cfg.family not in FIRST_KIND:
        raise ValueError(f"cheb1_smooth cannot run family {cfg.family!r}")
    lmax, lmin = cfg.lambda_max, cfg.lambda_min
    if lmin >= lmax:
        raise ValueError("lambda_min must be smaller than lambda_max")
    b = np.asarray(b, dtype=float)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    if cfg.k == 0:
        return x
    theta = 0.5 * (lmax + lmin)
    delta = 0.5 * (lmax - lmin)
    sigma = theta / delta
    rho = 1.0 / sigma
    r = S(b) if _is_zero(x0) else S(b - A @ x)
    d = r / theta
    for _ in range(1, cfg.k):
        x = x + d
        r = r - S(A @ d)
        rho_new = 1.0 / (2.0 * sigma - rho)
        d = rho_new * rho * d + (2.0 * rho_new / delta) * r
        rho = rho_new
    return x + d


def cheb4_smooth(A, S, b, x0, cfg: ChebyshevConfig, betas=None):
    """4th-kind (optionally beta-weighted) Chebyshev smoothing, ``cfg.k`` steps.

    The initial direction applies ``S`` to the residual like every later
    direction does.  Same application count as :func:`cheb1_smooth`.
    """
    if cfg.family not in FOURTH_KIND:
        raise ValueError(f"cheb4_smooth cannot run family {cfg.family!r}")
    b = np.asarray(b, dtype=float)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    k = cfg.k
    if k == 0:
        return x
    beta = cfg.step_weights() if betas is None else tuple(betas)
    if len(beta) != k:
        raise ValueError(f"need {k} beta values, got {len(beta)}")
    inv_lmax = 1.0 / cfg.lambda_max
    r = b.copy() if _is_zero(x0) else b - A @ x
    d = (4.0 / 3.0) * inv_lmax * S(r)
    for i in range(1, k):
        x = x + beta[i - 1] * d
        r = r - A @ d
        d = (2 * i - 1) / (2 * i + 3) * d + (8 * i + 4) / (2 * i + 3) * inv_lmax * S(r)
    return x + beta[k - 1] * d


def smooth(A, S, b, x0, cfg: ChebyshevConfig):
    """Dispatch to the smoother for ``cfg.family``."""
    if cfg.family in FIRST_KIND:
        return cheb1_smooth(A, S, b, x0, cfg)
    return cheb4_smooth(A, S, b, x0, cfg)


def estimate_lambda_max(S: JacobiSmoother, A: LinearOperator, iterations: int = 30,
                        seed: int = 0) -> float:
    """Power iteration on ``S A`` with a Rayleigh-quotient readout.

    The quotient ``<v, A v> / <v, S^{-1} v>`` is used, which is exact for
    eigenvectors of ``S A`` and converges at twice the rate of the iterate.
    Applications of ``A`` here are not added to its counter.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    count = A.apply_count
    rng = np.random.Generator(np.random.PCG64(seed))
    v = rng.uniform(-1.0, 1.0, size=A.shape[0])
    est = 0.0
    try:
        for _ in range(iterations):
            v = v / np.linalg.norm(v)
            Av = A @ v
            est = float(v @ Av) / float(v @ S.apply_inverse(v))
            v = S(Av)
    finally:
        A.apply_count = count
    return est
