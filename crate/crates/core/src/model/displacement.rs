use crate::error::{Error, Result};
use crate::model::pulse::PulseEnvelope;
use crate::ode::{self, Stepping};
use crate::qcore::{C64, I, ZERO};

/// Default spacing of the tabulated coherent amplitude, ps.
pub const DEFAULT_TABLE_STEP: f64 = 0.05;

const TABLE_TOLERANCE: Stepping = Stepping::Adaptive {
    rtol: 1e-11,
    atol: 1e-13,
};

/// Classical cavity amplitude α(t) obeying `α̇ = −(iΔ_c + κ/2)α − iΩ(t)/2`
/// with `α(0) = 0`, tabulated on a uniform grid and read back by cubic
/// Hermite interpolation.
///
/// Before `t = 0` the amplitude is zero. Past the table end the drive is
/// frozen at its last value and the closed-form relaxation is used, which is
/// exact for cw drive and for pulses that have already switched off.
#[derive(Debug, Clone)]
pub struct DisplacementTable {
    dt: f64,
    lambda: C64,
    pulse: PulseEnvelope,
    alpha: Vec<C64>,
    dalpha: Vec<C64>,
}

fn alpha_rate(lambda: C64, pulse: &PulseEnvelope, t: f64, a: C64) -> C64 {
    -lambda * a - I * (0.5 * pulse.omega(t))
}

impl DisplacementTable {
    pub fn solve(pulse: &PulseEnvelope, cavity_detuning: f64, kappa: f64, t_max: f64, dt: f64) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(Error::config("device", "cavity loss rate must be positive"));
        }
        if !(dt > 0.0) || !(t_max > 0.0) {
            return Err(Error::numerics("displacement", "table step and span must be positive"));
        }
        let lambda = C64::new(0.5 * kappa, cavity_detuning);
        let n = (t_max / dt).ceil() as usize + 1;
        let times: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
        let mut alpha = vec![ZERO; n];
        let p = pulse.clone();
        let mut rhs = move |t: f64, y: &[C64], dy: &mut [C64]| -> Result<()> {
            dy[0] = alpha_rate(lambda, &p, t, y[0]);
            Ok(())
        };
        ode::integrate(
            &mut rhs,
            0.0,
            &[ZERO],
            &times,
            TABLE_TOLERANCE,
            Some(0.5 * dt),
            |k, _, y| {
                alpha[k] = y[0];
                Ok(())
            },
        )?;
        let dalpha = times
            .iter()
            .zip(&alpha)
            .map(|(&t, &a)| alpha_rate(lambda, pulse, t, a))
            .collect();
        Ok(Self {
            dt,
            lambda,
            pulse: pulse.clone(),
            alpha,
            dalpha,
        })
    }

    pub fn t_max(&self) -> f64 {
        (self.alpha.len() - 1) as f64 * self.dt
    }

    pub fn step(&self) -> f64 {
        self.dt
    }

    /// Grid samples `(t_k, α(t_k))`.
    pub fn samples(&self) -> impl Iterator<Item = (f64, C64)> + '_ {
        self.alpha.iter().enumerate().map(|(k, &a)| (k as f64 * self.dt, a))
    }

    pub fn alpha(&self, t: f64) -> C64 {
        if t <= 0.0 {
            return ZERO;
        }
        let n = self.alpha.len();
        let t_end = self.t_max();
        if t >= t_end {
            let a_end = self.alpha[n - 1];
            let a_ss = -I * (0.5 * self.pulse.omega(t_end)) / self.lambda;
            return a_ss + (a_end - a_ss) * (-self.lambda * (t - t_end)).exp();
        }
        let x = t / self.dt;
        let k = (x.floor() as usize).min(n - 2);
        let s = x - k as f64;
        let (h00, h10, h01, h11) = hermite_basis(s);
        self.alpha[k] * h00
            + self.dalpha[k] * (h10 * self.dt)
            + self.alpha[k + 1] * h01
            + self.dalpha[k + 1] * (h11 * self.dt)
    }

    /// Largest |α| over the grid samples.
    pub fn peak_abs(&self) -> f64 {
        self.alpha.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }
}

fn hermite_basis(s: f64) -> (f64, f64, f64, f64) {
    let s2 = s * s;
    let s3 = s2 * s;
    (
        2.0 * s3 - 3.0 * s2 + 1.0,
        s3 - 2.0 * s2 + s,
        -2.0 * s3 + 3.0 * s2,
        s3 - s2,
    )
}

/// Effective emitter-frame area `∫ 2g|α(t)| dt / π` of a pulsed cavity drive.
///
/// The amplitude ODE is integrated jointly with the area until the pulse is
/// off; the free-decay tail `2g|α(T)|·2/κ` is added in closed form.
pub fn cavity_drive_area(pulse: &PulseEnvelope, cavity_detuning: f64, kappa: f64, g: f64) -> Result<f64> {
    if pulse.is_cw() {
        return Err(Error::config(
            "pulse.kind",
            "effective pulse area is undefined for cw drive",
        ));
    }
    let t_end = pulse.quiet_after(1e-17).unwrap_or(0.0).max(0.0);
    if t_end <= 0.0 {
        return Ok(0.0);
    }
    let lambda = C64::new(0.5 * kappa, cavity_detuning);
    let p = pulse.clone();
    let mut rhs = move |t: f64, y: &[C64], dy: &mut [C64]| -> Result<()> {
        dy[0] = alpha_rate(lambda, &p, t, y[0]);
        dy[1] = C64::new(2.0 * g * y[0].norm(), 0.0);
        Ok(())
    };
    let mut y = vec![ZERO, ZERO];
    let mut t = 0.0;
    // Step through in chunks so the integrator resolves the pulse.
    let chunk = pulse.sigma().map_or(1.0, |s| s / 4.0).max(0.05);
    while t < t_end {
        let t1 = (t + chunk).min(t_end);
        ode::advance(&mut rhs, t, t1, &mut y, TABLE_TOLERANCE, Some(chunk / 4.0))?;
        t = t1;
    }
    let tail = 2.0 * g * y[0].norm() * 2.0 / kappa;
    Ok((y[1].re + tail) / std::f64::consts::PI)
}

/// Steady-state emitter Rabi frequency `2g|α_ss|` under constant cavity drive Ω₀.
pub fn cavity_cw_rabi(omega0: f64, cavity_detuning: f64, kappa: f64, g: f64) -> f64 {
    g * omega0 / (cavity_detuning * cavity_detuning + 0.25 * kappa * kappa).sqrt()
}
