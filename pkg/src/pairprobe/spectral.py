"""Harmonic inversion of transient signals and an FFT periodogram cross-check.

The inversion fits c(t) ~ sum_k d_k exp((-gamma_k - i omega_k) t) with a
matrix-pencil (ESPRIT-family) solve: Hankel matrix, SVD rank truncation,
shift-invariance eigenproblem for the poles, least squares for the
amplitudes. This is the same line model filter diagonalization fits, and it
resolves beat frequencies well below the Fourier limit of the delay scan.

A non-recurring background (population that crosses the probe window once)
is not a line: a best-fit constant plus single decaying exponential is
removed before inversion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lstsq, svd

from .units import AU_TO_PS, C_SI, HARTREE_TO_CM1, PS_TO_AU

#: frequencies are reported in cm^-1: nu[cm^-1] = omega[au]/(2 pi) / (c * au_time)
_CM1_PER_AU_OMEGA = HARTREE_TO_CM1 / (2.0 * np.pi)


class InversionError(RuntimeError):
    """Ill-conditioned signal subspace."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


@dataclass(frozen=True)
class SpectralLine:
    frequency_cm1: float
    amplitude: float
    decay_cm1: float
    confidence: float


def _signal_arrays(signal):
    """Accept a TransientSignal or a (delays_ps, values) pair."""
    if hasattr(signal, "delays_ps"):
        return np.asarray(signal.delays_ps, float), np.asarray(signal.total, float)
    delays, values = signal
    return np.asarray(delays, float), np.asarray(values, float)


def remove_baseline(t_ps: np.ndarray, c: np.ndarray):
    """Best-fit constant + single decaying exponential, by a deterministic
    grid search over the decay rate with linear least squares for the two
    amplitudes. Returns (residual signal, (const, amp, rate_per_ps))."""
    span = t_ps[-1] - t_ps[0]
    best = (np.inf, (float(np.mean(c)), 0.0, 0.0))
    rates = np.concatenate(([0.0], np.geomspace(0.2 / span, 50.0 / span, 48)))
    tt = t_ps - t_ps[0]
    for lam in rates:
        basis = (np.ones_like(tt)[:, None] if lam == 0.0
                 else np.c_[np.ones_like(tt), np.exp(-lam * tt)])
        coef, *_ = lstsq(basis, c)
        resid = c - basis @ coef
        ss = float(resid @ resid)
        if ss < best[0] - 1e-15 * abs(best[0]):
            if lam == 0.0:
                best = (ss, (float(coef[0]), 0.0, 0.0))
            else:
                best = (ss, (float(coef[0]), float(coef[1]), float(lam)))
    const, amp, lam = best[1]
    return c - const - amp * np.exp(-lam * tt), best[1]


def _matrix_pencil(c: np.ndarray, dt_au: float, model_order: int):
    """Poles and complex amplitudes of the damped-exponential model."""
    n = len(c)
    pencil = n // 3
    rows = n - pencil
    hankel = np.empty((rows, pencil + 1))
    for i in range(rows):
        hankel[i] = c[i:i + pencil + 1]
    u, s, vh = svd(hankel, full_matrices=False)
    if s[0] <= 0.0:
        return np.array([]), np.array([]), 0.0
    rank = int(np.sum(s > 1e-12 * s[0]))
    order = max(1, min(model_order, rank, pencil - 1))
    condition = s[0] / s[order - 1]
    v0 = vh[:order, :pencil]
    v1 = vh[:order, 1:pencil + 1]
    try:
        poles = np.linalg.eigvals(np.linalg.pinv(v0.T) @ v1.T)
    except np.linalg.LinAlgError as err:
        raise InversionError(
            f"pencil eigenproblem failed (condition ~ {condition:.2e}); "
            "use a longer signal or fewer lines",
            condition=condition) from err
    if not np.all(np.isfinite(poles)):
        raise InversionError(
            f"non-finite poles (condition ~ {condition:.2e}); "
            "use a longer signal or fewer lines", condition=condition)
    # amplitudes from the full record
    vander = np.vander(poles, n, increasing=True).T
    amps, *_ = np.linalg.lstsq(vander, c.astype(complex), rcond=None)
    return poles, amps, condition


def harmonic_inversion(signal, band_cm1=None, max_lines: int = 12,
                       amplitude_floor_rel: float = 1e-3,
                       max_growth_cm1: float = 0.05):
    """Spectral lines of a uniformly sampled transient signal.

    ``band_cm1`` restricts the reported lines to [lo, hi] (defaults to the
    full (0, Nyquist) range). Lines are folded to frequency >= 0, sorted by
    amplitude, and filtered at amplitude_floor_rel of the strongest line.
    Returns (lines, diagnostics dict).
    """
    t_ps, values = _signal_arrays(signal)
    if len(values) < 64:
        raise InversionError("need at least 64 uniform samples")
    steps = np.diff(t_ps)
    if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-9):
        raise InversionError("delay sampling must be uniform")
    dt_au = float(steps[0]) * PS_TO_AU
    nyquist_cm1 = np.pi / dt_au * _CM1_PER_AU_OMEGA
    if band_cm1 is None:
        band_cm1 = (0.0, nyquist_cm1)
    lo, hi = band_cm1
    if hi > nyquist_cm1 * (1.0 + 1e-12):
        raise InversionError(
            f"band upper edge {hi:.3g} cm^-1 beyond Nyquist {nyquist_cm1:.3g}")

    c, baseline = remove_baseline(t_ps, values)
    scale = float(np.max(np.abs(c)))
    diagnostics = {"baseline": baseline, "nyquist_cm1": nyquist_cm1}
    if scale == 0.0:
        diagnostics.update(residual=0.0, condition=1.0)
        return [], diagnostics

    poles, amps, condition = _matrix_pencil(c / scale, dt_au,
                                            2 * max_lines + 4)
    diagnostics["condition"] = condition
    if len(poles) == 0:
        diagnostics["residual"] = 0.0
        return [], diagnostics

    # reconstruction residual over the record
    model = np.real(np.vander(poles, len(c), increasing=True).T @ amps) * scale
    resid = c - model
    diagnostics["residual"] = float(np.linalg.norm(resid)
                                    / np.linalg.norm(c))

    log_pole = np.log(poles.astype(complex))
    freq_cm1 = -np.imag(log_pole) / dt_au * _CM1_PER_AU_OMEGA
    decay_cm1 = -np.real(log_pole) / dt_au * _CM1_PER_AU_OMEGA

    freq_tol = 0.02 * nyquist_cm1 / len(c)
    lines = []
    for k in range(len(poles)):
        f = freq_cm1[k]
        if f < -freq_tol:
            continue  # negative twin of a folded pair
        folded_amp = abs(amps[k]) * scale
        if f > freq_tol:
            folded_amp *= 2.0  # conjugate partner carries the other half
        g = decay_cm1[k]
        if g < -max_growth_cm1:
            continue  # strongly growing pole: numerical artifact
        lines.append(SpectralLine(frequency_cm1=float(max(f, 0.0)),
                                  amplitude=float(folded_amp),
                                  decay_cm1=float(max(g, 0.0)),
                                  confidence=0.0))

    if lines:
        floor = amplitude_floor_rel * max(li.amplitude for li in lines)
        lines = [li for li in lines if li.amplitude > floor]
    lines = [li for li in lines if lo <= li.frequency_cm1 <= hi]
    lines = _attach_confidence(lines, t_ps, c, resid)
    lines.sort(key=lambda li: -li.amplitude)
    return lines, diagnostics


def _attach_confidence(lines, t_ps, c, resid):
    """confidence = 1 - (local spectral residual / local signal power) in a
    neighborhood of each line frequency."""
    if not lines:
        return lines
    n = len(c)
    window = np.hanning(n)
    pad = 8 * n
    spec_c = np.abs(np.fft.rfft(c * window, pad))
    spec_r = np.abs(np.fft.rfft(resid * window, pad))
    dt_ps = t_ps[1] - t_ps[0]
    freqs_cm1 = np.fft.rfftfreq(pad, d=dt_ps * 1e-12) / (C_SI * 100.0)
    rayleigh = 1.0 / ((t_ps[-1] - t_ps[0]) * 1e-12) / (C_SI * 100.0)
    out = []
    for li in lines:
        sel = np.abs(freqs_cm1 - li.frequency_cm1) <= 2.0 * rayleigh
        power_c = float(np.linalg.norm(spec_c[sel]))
        power_r = float(np.linalg.norm(spec_r[sel]))
        conf = 1.0 - (power_r / power_c if power_c > 0 else 1.0)
        out.append(SpectralLine(li.frequency_cm1, li.amplitude, li.decay_cm1,
                                float(max(conf, 0.0))))
    return out


def periodogram(signal, pad_factor: int = 8):
    """Hann-windowed magnitude spectrum; returns (freq_cm1, power)."""
    t_ps, values = _signal_arrays(signal)
    if len(values) < 2:
        raise InversionError("need at least 2 samples")
    n = len(values)
    window = np.hanning(n)
    spec = np.abs(np.fft.rfft(values * window, pad_factor * n)) ** 2
    dt_s = (t_ps[1] - t_ps[0]) * 1e-12
    freqs_cm1 = np.fft.rfftfreq(pad_factor * n, d=dt_s) / (C_SI * 100.0)
    return freqs_cm1, spec


def rayleigh_limit_cm1(t_ps) -> float:
    """Fourier resolution of the record: 1 / (c T)."""
    t_ps = np.asarray(t_ps, float)
    return 1.0 / ((t_ps[-1] - t_ps[0]) * 1e-12 * C_SI * 100.0)


def match_lines_to_levels(lines, bound_energies_hartree, tol_cm1: float = 0.05):
    """Tag each line with the nearest |E_v|, |E_v - E_v'|, or |E_v|/2
    candidate. Returns a list of (line, tag, candidate_cm1, mismatch_cm1)."""
    ev = np.abs(np.asarray(bound_energies_hartree)) * HARTREE_TO_CM1
    cands = [(e, "E_v") for e in ev] + [(e / 2.0, "E_v/2") for e in ev]
    for i in range(len(ev)):
        for j in range(i + 1, len(ev)):
            cands.append((abs(ev[i] - ev[j]), "E_v-E_v'"))
    out = []
    for li in lines:
        if not cands:
            out.append((li, None, None, None))
            continue
        cand, tag = min(cands, key=lambda ct: abs(ct[0] - li.frequency_cm1))
        mismatch = abs(cand - li.frequency_cm1)
        if mismatch <= tol_cm1:
            out.append((li, tag, float(cand), float(mismatch)))
        else:
            out.append((li, None, None, float(mismatch)))
    return out
