import logging
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Tuple

import numpy as np
from numpy.polynomial import legendre
from scipy import special
from scipy.integrate import IntegrationWarning, quad

logger = logging.getLogger(__name__)

# --- 설정값 ---
EULER_GAMMA = 0.57721566490153286061
K0_UNDERFLOW_X = 700.0          # 이보다 큰 인자에서는 0으로 처리
SERIES_CROSSOVER_X = 2.0        # 오름차순 급수 / 연분수 전환점
CF_EPS = 1e-16
CF_MAX_ITER = 10000
PV_TOL = 1e-10                  # 주값 적분 꼬리 절단 허용오차
QUAD_LIMIT = 400
QUAD_EPSABS = 1e-13
QUAD_EPSREL = 1e-11


class QuadratureError(ArithmeticError):
    """적분 규칙/주값 적분을 구성할 수 없을 때."""


# --- 적분 규칙 ---
@dataclass(frozen=True, eq=False)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    domain: Tuple[float, float] = (-1.0, 1.0)

    def integrate(self, func: Callable[[np.ndarray], np.ndarray]):
        return np.sum(self.weights * func(self.nodes))

    @property
    def size(self) -> int:
        return len(self.nodes)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@lru_cache(maxsize=64)
def gauss_legendre(n: int) -> QuadratureRule:
    """[-1, 1] 위의 n점 Gauss-Legendre 규칙 (차수 2n-1까지 정확)."""
    if n < 1:
        raise QuadratureError(f"Gauss-Legendre rule needs n >= 1, got {n}")
    nodes, weights = legendre.leggauss(n)
    return QuadratureRule(_frozen(nodes), _frozen(weights), (-1.0, 1.0))


def map_rule(rule: QuadratureRule, a: float, b: float) -> QuadratureRule:
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    return QuadratureRule(_frozen(mid + half * rule.nodes), _frozen(half * rule.weights), (a, b))


# --- 적분 래퍼 (복소 피적분함수 지원) ---
def integrate(func: Callable, a: float, b: float, **kwargs):
    """scipy quad 래퍼. 복소값이면 실수부/허수부를 나눠 적분한다.

    IntegrationWarning은 삼키지 않고 경고 로그로 남긴다.
    """
    kwargs.setdefault("limit", QUAD_LIMIT)
    kwargs.setdefault("epsabs", QUAD_EPSABS)
    kwargs.setdefault("epsrel", QUAD_EPSREL)
    if kwargs.get("weight") is not None:
        # QAWO/QAWF/QAWC/QAWS 는 points 를 받지 않는다
        kwargs.pop("points", None)
    elif kwargs.get("points") is not None:
        if np.isinf(a) or np.isinf(b):
            kwargs.pop("points")
        else:
            inside = [p for p in kwargs["points"] if a < p < b]
            kwargs["points"] = inside or None

    if np.isfinite(a) and np.isfinite(b):
        probe_at = a + 0.37 * (b - a)
    elif np.isfinite(a):
        probe_at = a + 1.0
    else:
        probe_at = b - 1.0 if np.isfinite(b) else 0.0
    is_complex = np.iscomplexobj(func(probe_at))

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", IntegrationWarning)
        if is_complex:
            re_val = quad(lambda t: np.real(func(t)), a, b, **kwargs)[0]
            im_val = quad(lambda t: np.imag(func(t)), a, b, **kwargs)[0]
            value = complex(re_val, im_val)
        else:
            value = quad(func, a, b, **kwargs)[0]
    for w in caught:
        if issubclass(w.category, IntegrationWarning):
            first_line = str(w.message).strip().splitlines()[0]
            logger.warning("Quadrature warning on [%g, %g]: %s", a, b, first_line)
    return value


# --- Macdonald 함수 K0 ---
def macdonald_k0(x):
    """K0(x), x > 0. 배열 입력 지원, x > 700 에서는 0."""
    arr = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0.0):
        raise ValueError("macdonald_k0 requires a positive finite argument")
    values = np.where(arr > K0_UNDERFLOW_X, 0.0, special.k0(np.minimum(arr, K0_UNDERFLOW_X)))
    if np.ndim(values) == 0:
        return float(values)
    return values


def k0_ascending_series(x: float) -> float:
    # K0 = -(ln(x/2) + γ) I0 + Σ H_k (x²/4)^k / (k!)²
    if x <= 0:
        raise ValueError("ascending series requires x > 0")
    y = 0.25 * x * x
    term = 1.0
    i0_sum = 1.0
    h_sum = 0.0
    harmonic = 0.0
    k = 0
    while True:
        k += 1
        term *= y / (k * k)
        harmonic += 1.0 / k
        i0_sum += term
        h_sum += harmonic * term
        if term < 1e-18 * i0_sum:
            break
    return -(math.log(0.5 * x) + EULER_GAMMA) * i0_sum + h_sum


def k0_continued_fraction(x: float) -> float:
    """Steed/Temme 연분수 (CF2) 로 K0 계산. x >= 2 에서 사용."""
    if x <= 0:
        raise ValueError("continued fraction requires x > 0")
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = delh = d
    q1, q2 = 0.0, 1.0
    a1 = 0.25
    q = c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, CF_MAX_ITER):
        a -= 2 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q += c * qnew
        b += 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h += delh
        dels = q * delh
        s += dels
        if abs(dels / s) < CF_EPS:
            break
    else:
        raise QuadratureError(f"K0 continued fraction did not converge at x={x}")
    return math.sqrt(math.pi / (2.0 * x)) * math.exp(-x) / s


def k0_dual_expansion(x: float) -> float:
    """독립 검증용 K0: x < 2 는 급수, 그 이상은 연분수."""
    if x < SERIES_CROSSOVER_X:
        return k0_ascending_series(x)
    return k0_continued_fraction(x)


def k0_asymptotic_series(x: float, max_terms: int = 30) -> float:
    # √(π/2x) e^{-x} Σ (-1)^k [1²·3²···(2k-1)²] / (k! (8x)^k), 가장 작은 항에서 멈춤
    total = 1.0
    term = 1.0
    for k in range(1, max_terms):
        nxt = -term * (2 * k - 1) ** 2 / (k * 8.0 * x)
        if abs(nxt) >= abs(term):
            break
        term = nxt
        total += term
    return math.sqrt(math.pi / (2.0 * x)) * math.exp(-x) * total


# --- 로그 곱 적분 규칙 ---
@lru_cache(maxsize=8192)
def _log_moments(n: int, x0: float, offset: float) -> np.ndarray:
    # M_j = ∫_{-1}^{1} P_j(x) ln √((x - x0)² + offset²) dx
    moments = np.empty(n)
    for j in range(n):
        coeffs = np.zeros(j + 1)
        coeffs[j] = 1.0
        p_j = legendre.Legendre(coeffs)
        if offset == 0.0 and -1.0 <= x0 <= 1.0:
            total = 0.0
            if x0 < 1.0:
                total += integrate(p_j, x0, 1.0, weight="alg-loga", wvar=(0.0, 0.0))
            if x0 > -1.0:
                total += integrate(p_j, -1.0, x0, weight="alg-logb", wvar=(0.0, 0.0))
            moments[j] = total
        else:
            moments[j] = integrate(
                lambda x: p_j(x) * 0.5 * np.log((x - x0) ** 2 + offset * offset),
                -1.0,
                1.0,
                points=[min(max(x0, -1.0), 1.0)],
            )
    moments.setflags(write=False)
    return moments


def log_product_rule(
    panel: Tuple[float, float],
    target: float,
    n: int = 16,
    offset: float = 0.0,
    allow_exterior: bool = False,
) -> QuadratureRule:
    """패널의 Gauss-Legendre 노드에서 f(s)·ln√((s-s0)²+offset²) 를 적분하는 가중치.

    n-1 차 이하 다항식 f 에 대해 정확하다. offset > 0 또는 allow_exterior 이면
    s0 가 패널 밖이어도 된다 (인접 패널, 다른 성분과의 근접 상호작용).
    """
    a, b = float(panel[0]), float(panel[1])
    if not b > a:
        raise QuadratureError(f"degenerate panel ({a}, {b})")
    if offset < 0:
        raise QuadratureError("offset must be non-negative")
    if not (a <= target <= b) and not allow_exterior and offset == 0.0:
        raise QuadratureError(f"target {target} outside panel ({a}, {b})")

    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    x0 = round((target - mid) / half, 14)
    scaled_offset = round(offset / half, 14)

    base = gauss_legendre(n)
    moments = _log_moments(n, x0, scaled_offset)
    # 노드별 Legendre 값 행렬 V[i, j] = P_j(x_i)
    vander = legendre.legvander(base.nodes, n - 1)
    factors = (2.0 * np.arange(n) + 1.0) / 2.0
    ref_weights = base.weights * (vander @ (factors * moments))
    weights = half * (base.weights * math.log(half) + ref_weights)
    return QuadratureRule(_frozen(mid + half * base.nodes), _frozen(weights), (a, b))


# --- 주값 (principal value) 적분 ---
@dataclass(frozen=True)
class PVIntegrand:
    """P∫₀^∞ numerator(t)/(t - t0) dt 의 입력.

    envelope/frequency 가 주어지면 numerator(t) = envelope(t)·cos(frequency·t) 로
    간주하고 꼬리 구간을 진동 가중 적분(QAWF)으로 처리한다.
    """

    numerator: Callable[[float], complex]
    t0: float
    envelope: Optional[Callable[[float], complex]] = None
    frequency: float = 0.0
    breakpoints: Tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not math.isfinite(self.t0):
            raise QuadratureError("singular point must be finite")
        if self.frequency < 0:
            raise QuadratureError("frequency must be non-negative")

    @property
    def oscillatory(self) -> bool:
        return self.envelope is not None and self.frequency > 0.0


def _plain_or_cosine(integrand: PVIntegrand, a: float, b: float):
    """[a, b] 에서 numerator/(t - t0) 정규 적분 (특이점 미포함 구간)."""
    t0 = integrand.t0
    if integrand.oscillatory:
        env = integrand.envelope
        return integrate(lambda t: env(t) / (t - t0), a, b, weight="cos", wvar=integrand.frequency)
    num = integrand.numerator
    return integrate(lambda t: num(t) / (t - t0), a, b, points=list(integrand.breakpoints))


def _tail(integrand: PVIntegrand, start: float, tail_decay: float, tol: float):
    t0 = integrand.t0
    if integrand.oscillatory:
        env = integrand.envelope
        return integrate(lambda t: env(t) / (t - t0), start, np.inf, weight="cos", wvar=integrand.frequency)

    value = 0.0
    beyond = [p for p in integrand.breakpoints if p > start]
    if beyond:
        stop = max(beyond)
        value += _plain_or_cosine(integrand, start, stop)
        start = stop
    num = integrand.numerator
    if tail_decay > 0.0:
        # |numerator| <= C·exp(-tail_decay·√t) 로 꼬리를 절단
        t_max = (math.sqrt(start) + math.log(1.0 / tol) / tail_decay) ** 2
        return value + integrate(lambda t: num(t) / (t - t0), start, t_max, limit=2000)
    return value + integrate(lambda t: num(t) / (t - t0), start, np.inf)


def pv_semiinfinite(integrand: PVIntegrand, tail_decay: float = 0.0, tol: float = PV_TOL, window: Optional[float] = None):
    """특이점 차감 방식의 P∫₀^∞ f(t)/(t - t0) dt.

    대칭 창 [t0-δ, t0+δ] 안에서는 (f(t) - f(t0))/(t - t0) 를 정규 적분하고
    (상수 f(t0) 의 대칭 창 주값은 0), 창 밖은 일반 적분으로 처리한다.
    tail_decay 는 분자가 exp(-tail_decay·√t) 로 감소한다는 경계이다.
    """
    t0 = integrand.t0
    if t0 <= 0.0:
        raise QuadratureError(f"singular point t0={t0} at or beyond the domain edge")
    if tail_decay < 0.0 or not math.isfinite(tail_decay):
        raise QuadratureError(f"tail bound unachievable with decay rate {tail_decay}")

    delta = 0.5 * t0 if window is None else min(window, t0)
    lo, hi = t0 - delta, t0 + delta
    num = integrand.numerator
    f0 = num(t0)
    zero = 0.0 * f0

    def subtracted(t):
        dt = t - t0
        if dt == 0.0:
            return zero
        return (num(t) - f0) / dt

    inner_points = [t0] + [p for p in integrand.breakpoints if lo < p < hi]
    total = integrate(subtracted, lo, hi, points=inner_points)
    if lo > 0.0:
        total += _plain_or_cosine(integrand, 0.0, lo)
    total += _tail(integrand, hi, tail_decay, tol)
    return total


def pv_cauchy_window(integrand: PVIntegrand):
    """검증용 주값: [0, 2t0] 은 QUADPACK 코시 가중(QAWC), 나머지는 꼬리 적분."""
    t0 = integrand.t0
    if t0 <= 0.0:
        raise QuadratureError(f"singular point t0={t0} at or beyond the domain edge")
    num = integrand.numerator
    total = integrate(num, 0.0, 2.0 * t0, weight="cauchy", wvar=t0)
    total += _tail(integrand, 2.0 * t0, 0.0, PV_TOL)
    return total


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO, format="[%(asctime)s] %(message)s", datefmt="%Y-%m-%d %H:%M:%S")
    for x in (1e-6, 0.5, 1.0, 2.0, 20.0):
        logger.info("K0(%g) = %.17g  (dual expansion %.17g)", x, macdonald_k0(x), k0_dual_expansion(x))
    pv = pv_semiinfinite(PVIntegrand(numerator=lambda t: math.exp(-t), t0=1.0))
    logger.info("P∫ e^-t/(t-1) dt = %.12f  (-Ei(1)/e = %.12f)", pv, -special.expi(1.0) / math.e)
