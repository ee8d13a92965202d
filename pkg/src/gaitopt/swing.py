"""Quintic swing-foot trajectories between optimized footholds.

x and y interpolate with a single rest-to-rest quintic; z uses two
rest-to-rest quintics meeting at the apex at T/2, which pins the peak at
max(p0_z, p1_z) + apex height with zero velocity and acceleration at the
junction (C2 by construction).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _rest_to_rest(a: float, b: float, d: float) -> np.ndarray:
    """Quintic coefficients (ascending powers) from a to b over [0, d]
    with zero start/end velocity and acceleration."""
    c = np.zeros(6)
    c[0] = a
    delta = b - a
    c[3] = 10.0 * delta / d**3
    c[4] = -15.0 * delta / d**4
    c[5] = 6.0 * delta / d**5
    return c


def _poly_eval(coeffs: np.ndarray, t):
    t = np.asarray(t, dtype=float)
    pos = np.polynomial.polynomial.polyval(t, coeffs)
    vel = np.polynomial.polynomial.polyval(t, np.polynomial.polynomial.polyder(coeffs))
    acc = np.polynomial.polynomial.polyval(
        t, np.polynomial.polynomial.polyder(coeffs, 2)
    )
    return pos, vel, acc


@dataclass(frozen=True)
class SwingSpline:
    """Closed-form swing trajectory between lift-off and touchdown."""

    lift_off: np.ndarray
    touchdown: np.ndarray
    duration: float
    apex_height: float
    x_coeffs: np.ndarray
    y_coeffs: np.ndarray
    z_up_coeffs: np.ndarray
    z_down_coeffs: np.ndarray

    @property
    def apex(self) -> float:
        return max(self.lift_off[2], self.touchdown[2]) + self.apex_height

    def evaluate(self, t: float):
        """Position, velocity, acceleration at time t in [0, duration]."""
        if t < -1e-12 or t > self.duration + 1e-12:
            raise ValueError(f"t={t} outside [0, {self.duration}]")
        t = min(max(t, 0.0), self.duration)
        px, vx, ax = _poly_eval(self.x_coeffs, t)
        py, vy, ay = _poly_eval(self.y_coeffs, t)
        half = self.duration / 2.0
        if t <= half:
            pz, vz, az = _poly_eval(self.z_up_coeffs, t)
        else:
            pz, vz, az = _poly_eval(self.z_down_coeffs, t - half)
        return (
            np.array([px, py, pz]),
            np.array([vx, vy, vz]),
            np.array([ax, ay, az]),
        )


def build_swing(
    p0: np.ndarray, p1: np.ndarray, duration: float, apex_height: float
) -> SwingSpline:
    """Construct the two-segment quintic swing spline."""
    if duration <= 0:
        raise ValueError("swing duration must be positive")
    if apex_height < 0:
        raise ValueError("apex height must be non-negative")
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    apex = max(p0[2], p1[2]) + apex_height
    half = duration / 2.0
    return SwingSpline(
        lift_off=p0,
        touchdown=p1,
        duration=float(duration),
        apex_height=float(apex_height),
        x_coeffs=_rest_to_rest(p0[0], p1[0], duration),
        y_coeffs=_rest_to_rest(p0[1], p1[1], duration),
        z_up_coeffs=_rest_to_rest(p0[2], apex, half),
        z_down_coeffs=_rest_to_rest(apex, p1[2], half),
    )


def evaluate(spline: SwingSpline, t: float):
    """Functional alias of SwingSpline.evaluate."""
    return spline.evaluate(t)
