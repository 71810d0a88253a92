//! Daily load shape used to spread a static case over a horizon.

use super::{Case, DenseMatrix};

/// Piecewise-cosine daily shape with a morning trough and an evening peak.
///
/// Between the trough and the peak the factor rises along a half cosine,
/// and falls back along another half cosine over the remaining hours.
/// Reactive demand is held at its nominal value.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadProfile {
    pub trough_hour: f64,
    pub peak_hour: f64,
    pub min_factor: f64,
    pub max_factor: f64,
    /// Clock time of the first step.
    pub start_hour: f64,
}

impl Default for LoadProfile {
    fn default() -> Self {
        LoadProfile { trough_hour: 4.0, peak_hour: 19.0, min_factor: 0.6, max_factor: 1.0, start_hour: 0.0 }
    }
}

impl LoadProfile {
    /// Flat profile, every step at nominal demand.
    pub fn flat() -> Self {
        LoadProfile { min_factor: 1.0, max_factor: 1.0, ..Default::default() }
    }

    /// Active demand factor at clock hour `h`.
    pub fn factor(&self, h: f64) -> f64 {
        let h = h.rem_euclid(24.0);
        let span = (self.max_factor - self.min_factor) / 2.0;
        let rise = (self.peak_hour - self.trough_hour).rem_euclid(24.0);
        let since_trough = (h - self.trough_hour).rem_euclid(24.0);
        if since_trough <= rise {
            let s = since_trough / rise;
            self.min_factor + span * (1.0 - (std::f64::consts::PI * s).cos())
        } else {
            let s = (since_trough - rise) / (24.0 - rise);
            self.max_factor - span * (1.0 - (std::f64::consts::PI * s).cos())
        }
    }

    /// Active and reactive factors for each step.
    pub fn factors(&self, periods: usize, dt_hours: f64) -> (Vec<f64>, Vec<f64>) {
        let cp = (0..periods).map(|t| self.factor(self.start_hour + t as f64 * dt_hours)).collect();
        (cp, vec![1.0; periods])
    }

    /// Case demand scaled by this profile over the case horizon.
    pub fn apply(&self, case: &Case) -> Case {
        let mut c = case.clone();
        let (pd, qd) = load_profiles(case, case.periods, case.dt_hours, self);
        c.pd = pd;
        c.qd = qd;
        c
    }
}

/// Active demand factors of the default daily shape.
pub fn diurnal_factors(periods: usize, dt_hours: f64) -> Vec<f64> {
    LoadProfile::default().factors(periods, dt_hours).0
}

/// Demand matrices `PD`, `QD` (`n_b × T`) from the static bus demand.
pub fn load_profiles(case: &Case, periods: usize, dt_hours: f64, profile: &LoadProfile) -> (DenseMatrix, DenseMatrix) {
    let (cp, cq) = profile.factors(periods, dt_hours);
    let nb = case.nb();
    let mut pd = DenseMatrix::zeros(nb, periods);
    let mut qd = DenseMatrix::zeros(nb, periods);
    for (i, b) in case.buses.iter().enumerate() {
        for t in 0..periods {
            pd.set(i, t, b.pd * cp[t]);
            qd.set(i, t, b.qd * cq[t]);
        }
    }
    (pd, qd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::case9;

    #[test]
    fn trough_in_morning_peak_in_evening() {
        let f = diurnal_factors(24, 1.0);
        let (imin, _) = f.iter().enumerate().fold((0, f64::MAX), |a, (i, &v)| if v < a.1 { (i, v) } else { a });
        let (imax, _) = f.iter().enumerate().fold((0, f64::MIN), |a, (i, &v)| if v > a.1 { (i, v) } else { a });
        assert!((2..=7).contains(&imin), "trough at {imin}");
        assert!((17..=21).contains(&imax), "peak at {imax}");
        let ratio = f[imax] / f[imin];
        assert!((1.3..=2.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn profile_is_continuous() {
        let p = LoadProfile::default();
        for k in 0..2400 {
            let h = k as f64 / 100.0;
            assert!((p.factor(h) - p.factor(h + 0.01)).abs() < 0.01);
        }
    }

    #[test]
    fn reactive_held_constant() {
        let c = case9().with_horizon(24, 1.0);
        let (pd, qd) = load_profiles(&c, 24, 1.0, &LoadProfile::default());
        for t in 0..24 {
            assert_eq!(qd.get(4, t), 30.0);
        }
        assert!(pd.get(4, 4) < pd.get(4, 19));
    }
}
