"""
Quadrature-imbalance calibration on the leakage tone.

The leakage dominates the I/Q samples, so the cloud of (I, Q) points traces
an ellipse.  A Taubin algebraic fit seeds a Levenberg-Marquardt refinement of
the orthogonal (geometric) distances, and the ellipse shape is mapped back to
the imbalance pair of the model I = cos(u), Q = A_E sin(u + theta_E).

Ellipse to imbalance
--------------------
Eliminating u from the model gives the quadratic form

    x^2 - (2 sin(theta_E) / A_E) x y + y^2 / A_E^2 = R^2 cos^2(theta_E),

so with M = Rot(tilt) diag(1/a^2, 1/b^2) Rot(tilt)^T (any positive multiple of
the form matrix),

    A_E = sqrt(M11 / M22),    theta_E = arcsin(-M12 / sqrt(M11 M22)).

Taking I as the unit-amplitude reference removes the (A_E, theta_E) versus
(1/A_E, -theta_E) ambiguity.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg
from scipy import fft as sfft

from .errors import DegenerateConic, InsufficientPoints, LowSNRForCalibration, SingularTransform
from .frames import COMPLEX, FrameCube


@dataclass(frozen=True)
class EllipseFit:
    center: tuple[float, float]
    semi_axes: tuple[float, float]   # (a, b), a >= b
    tilt: float                      # angle of the major axis, (-pi/2, pi/2]
    algebraic_residual: float
    geometric_rms: float
    iterations: int = 0
    converged: bool = False
    cost_history: tuple[float, ...] = ()

    @property
    def params(self) -> np.ndarray:
        return np.array([*self.center, *self.semi_axes, self.tilt])


@dataclass(frozen=True)
class ImbalanceEstimate:
    A_E_hat: float
    theta_E_hat: float
    source_fit: EllipseFit | None = None


def _as_points(points) -> np.ndarray:
    p = np.asarray(points, dtype=float)
    if p.ndim != 2 or p.shape[1] != 2:
        raise ValueError("points must have shape (n, 2)")
    return p


def _wrap_tilt(t: float) -> float:
    t = (t + np.pi / 2) % np.pi - np.pi / 2
    return np.pi / 2 if t == -np.pi / 2 else t


def conic_to_geometric(coef) -> tuple[tuple[float, float], tuple[float, float], float]:
    """Center, (a, b) and tilt of A x^2 + B xy + C y^2 + D x + E y + F = 0."""
    A, B, C, D, E, F = map(float, coef)
    if B * B - 4 * A * C >= 0:
        raise DegenerateConic("conic is not an ellipse (B^2 - 4AC >= 0)")
    x0, y0 = np.linalg.solve([[2 * A, B], [B, 2 * C]], [-D, -E])
    f0 = F + 0.5 * (D * x0 + E * y0)
    lam, vec = np.linalg.eigh([[A, B / 2], [B / 2, C]])
    ax2 = -f0 / lam
    if np.any(ax2 <= 0):
        raise DegenerateConic("imaginary ellipse")
    # eigh sorts ascending, so the smaller eigenvalue carries the major axis.
    a, b = np.sqrt(ax2)
    tilt = _wrap_tilt(float(np.arctan2(vec[1, 0], vec[0, 0])))
    return (float(x0), float(y0)), (float(a), float(b)), tilt


def fit_ellipse_taubin(points) -> EllipseFit:
    """Taubin-normalized algebraic conic fit of 2-D points."""
    p = _as_points(points)
    if p.shape[0] < 6:
        raise InsufficientPoints(f"need at least 6 points, got {p.shape[0]}")
    mean = p.mean(axis=0)
    q = p - mean
    scale = np.sqrt(np.mean(np.sum(q * q, axis=1)) / 2.0)
    if not scale > 0:
        raise DegenerateConic("all points coincide")
    x, y = (q / scale).T
    z = np.column_stack([x * x, x * y, y * y, x, y])
    zm = z.mean(axis=0)
    P = np.cov(z, rowvar=False, bias=True)
    mxx, mxy, myy = zm[0], zm[1], zm[2]
    Q = np.zeros((5, 5))
    Q[:3, :3] = [[4 * mxx, 2 * mxy, 0], [2 * mxy, mxx + myy, 2 * mxy], [0, 2 * mxy, 4 * myy]]
    Q[3, 3] = Q[4, 4] = 1.0
    try:
        w, v = scipy.linalg.eigh(P, Q)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise DegenerateConic(f"Taubin eigenproblem failed: {exc}") from None
    theta = v[:, 0]
    coef = np.append(theta, -zm @ theta)
    (cx, cy), (a, b), tilt = conic_to_geometric(coef)
    center = (mean[0] + scale * cx, mean[1] + scale * cy)
    fit = EllipseFit(center, (scale * a, scale * b), tilt, float(max(w[0], 0.0)), 0.0)
    return replace(fit, geometric_rms=float(np.sqrt(np.mean(ellipse_distances(fit.params, p) ** 2))))


def _local(params, p):
    xc, yc, a, b, t = params
    c, s = np.cos(t), np.sin(t)
    dx, dy = p[:, 0] - xc, p[:, 1] - yc
    return c * dx + s * dy, -s * dx + c * dy


def _foot_angles(params, p, iters: int = 30) -> np.ndarray:
    """Parameter u of the orthogonal foot point X(u) = (a cos u, b sin u)."""
    _, _, a, b, _ = params
    xl, yl = _local(params, p)
    u = np.arctan2(a * yl, b * xl)
    for _ in range(iters):
        su, cu = np.sin(u), np.cos(u)
        g = (a * a - b * b) * su * cu - xl * a * su + yl * b * cu
        dg = (a * a - b * b) * (cu * cu - su * su) - xl * a * cu - yl * b * su
        step = np.where(dg != 0, g / np.where(dg != 0, dg, 1.0), 0.0)
        u = u - step
        if np.max(np.abs(step)) < 1e-15:
            break
    return u


def _residuals_and_jacobian(params, p):
    _, _, a, b, _ = params
    u = _foot_angles(params, p)
    xl, yl = _local(params, p)
    cu, su = np.cos(u), np.sin(u)
    nx, ny = b * cu, a * su
    norm = np.hypot(nx, ny)
    nx, ny = nx / norm, ny / norm
    d = nx * (xl - a * cu) + ny * (yl - b * su)
    t = params[4]
    c, s = np.cos(t), np.sin(t)
    # Derivatives at fixed u; the foot point is stationary so du/dp drops out.
    jac = np.column_stack([
        -(nx * c - ny * s),
        -(nx * s + ny * c),
        -nx * cu,
        -ny * su,
        -(-nx * b * su + ny * a * cu),
    ])
    return d, jac


def ellipse_distances(params, points) -> np.ndarray:
    """Signed orthogonal distances of ``points`` to the ellipse (positive outside)."""
    return _residuals_and_jacobian(np.asarray(params, float), _as_points(points))[0]


def _canonical(params) -> np.ndarray:
    xc, yc, a, b, t = params
    a, b = abs(a), abs(b)
    if b > a:
        a, b, t = b, a, t + np.pi / 2
    return np.array([xc, yc, a, b, _wrap_tilt(t)])


def refine_ellipse_lm(fit: EllipseFit, points, tol: float = 1e-9, max_iters: int = 100) -> EllipseFit:
    """Levenberg-Marquardt minimization of squared orthogonal distances.

    ``tol`` bounds the accepted geometric RMS: the loop stops once the cost
    stagnates, and the result counts as converged only if the RMS is at most
    ``tol`` at that point.  Hitting ``max_iters`` returns the best parameters
    found with ``converged=False``.
    """
    p = _as_points(points)
    if max_iters <= 0:
        return replace(fit, converged=False)
    params = fit.params.copy()
    r, jac = _residuals_and_jacobian(params, p)
    cost = float(r @ r)
    history = [cost]
    lam = 1e-3
    scale = max(fit.semi_axes)
    floor = (1e-14 * scale) ** 2 * p.shape[0]
    converged = False
    it = 0
    while it < max_iters:
        it += 1
        if cost <= floor:
            converged = True
            break
        jtj = jac.T @ jac
        grad = jac.T @ r
        damp = np.diag(np.diag(jtj)) + 1e-30 * np.eye(5)
        try:
            step = -np.linalg.solve(jtj + lam * damp, grad)
        except np.linalg.LinAlgError:
            lam *= 10.0
            continue
        trial = _canonical(params + step)
        if trial[3] <= 0:
            lam *= 10.0
            continue
        r_t, jac_t = _residuals_and_jacobian(trial, p)
        cost_t = float(r_t @ r_t)
        if cost_t <= cost:
            small = cost - cost_t <= 1e-14 * cost or np.linalg.norm(step) <= 1e-13 * (1 + np.linalg.norm(params))
            params, r, jac, cost = trial, r_t, jac_t, cost_t
            history.append(cost)
            lam = max(lam / 10.0, 1e-12)
            if small:
                converged = True
                break
        else:
            lam *= 10.0
            if lam > 1e12:
                converged = True
                break
    rms = float(np.sqrt(cost / p.shape[0]))
    return EllipseFit((float(params[0]), float(params[1])), (float(params[2]), float(params[3])),
                      float(params[4]), fit.algebraic_residual, rms, it,
                      bool(converged and rms <= tol), tuple(history))


def ellipse_to_imbalance(fit: EllipseFit) -> ImbalanceEstimate:
    a, b = fit.semi_axes
    c, s = np.cos(fit.tilt), np.sin(fit.tilt)
    rot = np.array([[c, -s], [s, c]])
    m = rot @ np.diag([1 / a ** 2, 1 / b ** 2]) @ rot.T
    amp = float(np.sqrt(m[0, 0] / m[1, 1]))
    theta = float(np.arcsin(np.clip(-m[0, 1] / np.sqrt(m[0, 0] * m[1, 1]), -1.0, 1.0)))
    return ImbalanceEstimate(amp, theta, fit)


def leakage_margin_db(i: np.ndarray, q: np.ndarray) -> float:
    """Mean per-chirp peak-to-median power ratio of the Hann spectrum of I + jQ [dB]."""
    x = np.atleast_2d(i) + 1j * np.atleast_2d(q)
    spec = sfft.fft(x * np.hanning(x.shape[-1]), axis=-1)
    pw = spec.real ** 2 + spec.imag ** 2
    with np.errstate(divide="ignore"):
        return float(np.mean(10 * np.log10(pw.max(axis=-1) / np.median(pw, axis=-1))))


def estimate_imbalance(i: FrameCube, q: FrameCube, margin_db: float = 30.0,
                       chirps: int | None = None, max_points: int | None = 20000,
                       max_iters: int = 50) -> ImbalanceEstimate:
    """Fit the leakage ellipse of an I/Q pair and return (A_E, theta_E).

    Samples are pooled over the first ``chirps`` chirps (default all) and
    decimated to at most ``max_points`` with a uniform stride (None keeps all).
    """
    if i.data.shape != q.data.shape:
        raise ValueError("I and Q frames differ in shape")
    i.require_nonempty()
    rows = slice(0, chirps)
    di, dq = i.data[rows], q.data[rows]
    margin = leakage_margin_db(di, dq)
    if not margin >= margin_db:
        raise LowSNRForCalibration(f"leakage peak-to-median {margin:.1f} dB below {margin_db} dB")
    pts = np.column_stack([di.ravel(), dq.ravel()])
    stride = 1 if max_points is None else max(1, -(-pts.shape[0] // max_points))
    pts = pts[::stride]
    init = fit_ellipse_taubin(pts)
    fit = refine_ellipse_lm(init, pts, tol=0.1 * init.semi_axes[1], max_iters=max_iters)
    return ellipse_to_imbalance(fit)


def correct_iq(i: FrameCube, q: FrameCube, est: ImbalanceEstimate) -> FrameCube:
    """Undo the imbalance: I' = I, Q' = -tan(theta) I + Q / (A cos(theta)); returns I' + jQ'."""
    if i.data.shape != q.data.shape:
        raise ValueError("I and Q frames differ in shape")
    cos_t = np.cos(est.theta_E_hat)
    if abs(cos_t) < 1e-9:
        raise SingularTransform("|cos(theta_E)| < 1e-9")
    qc = -np.tan(est.theta_E_hat) * i.data + q.data / (est.A_E_hat * cos_t)
    return i.with_data(i.data + 1j * qc, kind=COMPLEX, path="iq-corrected")


def combine_iq(i: FrameCube, q: FrameCube) -> FrameCube:
    """Uncorrected I + jQ."""
    return i.with_data(i.data + 1j * q.data, kind=COMPLEX, path="iq-raw")


def irr(amplitude: float, theta: float) -> float:
    """Analytic image rejection ratio of an imbalance pair [dB]; inf when balanced."""
    c = 2.0 * amplitude * np.cos(theta)
    num = 1.0 + amplitude ** 2 + c
    den = 1.0 + amplitude ** 2 - c
    if den <= 0.0:
        return float("inf")
    return float(10.0 * np.log10(num / den))


def measured_irr(frames: FrameCube, search: int = 3) -> float:
    """Carrier-to-image ratio of a complex frame, averaged over chirps in dB.

    Per chirp the strongest line of the Hann-windowed spectrum is the carrier;
    the image is the strongest bin within +-``search`` bins of its mirror.
    """
    if not frames.is_complex:
        raise ValueError("measured IRR needs a complex frame")
    frames.require_nonempty()
    n = frames.samples
    spec = sfft.fft(frames.data * np.hanning(n), axis=-1)
    pw = spec.real ** 2 + spec.imag ** 2
    k = np.argmax(pw, axis=-1)
    offs = np.arange(-search, search + 1)
    mirror = (-k[:, None] + offs[None, :]) % n
    image = np.take_along_axis(pw, mirror, axis=-1).max(axis=-1)
    carrier = pw[np.arange(pw.shape[0]), k]
    with np.errstate(divide="ignore"):
        return float(np.mean(10 * np.log10(carrier / image)))
