//! P/PI/PD/PID and full-state feedback control laws.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{config, Error};
use crate::plant::{PlantId, PlantModel, PlantState, MAX_DIM};

/// Filter coefficient of the dirty derivative, rad/s.
pub const DERIVATIVE_FILTER_N: f64 = 50.0;

/// The integral term may contribute at most this multiple of the actuator limit.
pub const ANTI_WINDUP_FACTOR: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ControllerKind {
    P,
    PI,
    PD,
    PID,
    FSF,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 5] =
        [ControllerKind::P, ControllerKind::PI, ControllerKind::PD, ControllerKind::PID, ControllerKind::FSF];

    pub fn as_str(self) -> &'static str {
        match self {
            ControllerKind::P => "P",
            ControllerKind::PI => "PI",
            ControllerKind::PD => "PD",
            ControllerKind::PID => "PID",
            ControllerKind::FSF => "FSF",
        }
    }

    pub fn long_name(self) -> &'static str {
        match self {
            ControllerKind::P => "Proportional controller",
            ControllerKind::PI => "Proportional-Integral controller",
            ControllerKind::PD => "Proportional-Derivative controller",
            ControllerKind::PID => "Proportional-Integral-Derivative controller",
            ControllerKind::FSF => "Full-State Feedback controller",
        }
    }

    /// Gain names in canonical order for this kind on `plant`.
    pub fn gain_names(self, plant: &PlantModel) -> Vec<String> {
        match self {
            ControllerKind::P => alloc::vec!["Kp".into()],
            ControllerKind::PI => alloc::vec!["Kp".into(), "Ki".into()],
            ControllerKind::PD => alloc::vec!["Kp".into(), "Kd".into()],
            ControllerKind::PID => alloc::vec!["Kp".into(), "Ki".into(), "Kd".into()],
            ControllerKind::FSF => (1..=plant.feedback_indices().len()).map(|j| format!("K{j}")).collect(),
        }
    }
}

impl core::str::FromStr for ControllerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        ControllerKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| config(format!("unknown controller type '{s}'")))
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Insertion-ordered name→value map, serialized as a JSON object in order.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ParamMap<T>(Vec<(String, T)>);

impl<T> ParamMap<T> {
    pub fn new() -> Self {
        ParamMap(Vec::new())
    }

    pub fn get(&self, name: &str) -> Option<&T> {
        self.0.iter().find(|(k, _)| k == name).map(|(_, v)| v)
    }

    /// Replaces an existing entry in place, otherwise appends.
    pub fn insert(&mut self, name: impl Into<String>, value: T) {
        let name = name.into();
        match self.0.iter_mut().find(|(k, _)| *k == name) {
            Some(slot) => slot.1 = value,
            None => self.0.push((name, value)),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &T)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|(k, _)| k.as_str())
    }

    pub fn values(&self) -> impl Iterator<Item = &T> {
        self.0.iter().map(|(_, v)| v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<T> FromIterator<(String, T)> for ParamMap<T> {
    fn from_iter<I: IntoIterator<Item = (String, T)>>(iter: I) -> Self {
        let mut m = ParamMap::new();
        for (k, v) in iter {
            m.insert(k, v);
        }
        m
    }
}

impl<T: Serialize> Serialize for ParamMap<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for ParamMap<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V<T>(core::marker::PhantomData<T>);
        impl<'de, T: Deserialize<'de>> Visitor<'de> for V<T> {
            type Value = ParamMap<T>;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an object of named parameters")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut a: A) -> Result<Self::Value, A::Error> {
                let mut m = ParamMap::new();
                while let Some((k, v)) = a.next_entry::<String, T>()? {
                    m.insert(k, v);
                }
                Ok(m)
            }
        }
        d.deserialize_map(V(core::marker::PhantomData))
    }
}

/// Closed interval a gain may take, serialized as `[min, max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct GainRange {
    pub min: f64,
    pub max: f64,
}

impl GainRange {
    pub const fn new(min: f64, max: f64) -> Self {
        GainRange { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.min + self.max)
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.min, self.max)
    }

    pub fn is_valid(&self) -> bool {
        self.min.is_finite() && self.max.is_finite() && self.min < self.max
    }
}

impl From<[f64; 2]> for GainRange {
    fn from(v: [f64; 2]) -> Self {
        GainRange { min: v[0], max: v[1] }
    }
}

impl From<GainRange> for [f64; 2] {
    fn from(r: GainRange) -> Self {
        [r.min, r.max]
    }
}

pub type Gains = ParamMap<f64>;
pub type Ranges = ParamMap<GainRange>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerSpec {
    pub kind: ControllerKind,
    pub gains: Gains,
    pub ranges: Ranges,
}

impl ControllerSpec {
    /// Spec with the default ranges for `plant` and the given gains.
    pub fn with_gains(kind: ControllerKind, plant: &PlantModel, values: &[f64]) -> Result<Self, Error> {
        let ranges = default_ranges(kind, plant.id())?;
        let names = kind.gain_names(plant);
        if names.len() != values.len() {
            return Err(config(format!("{kind} on {} takes {} gains, got {}", plant.id(), names.len(), values.len())));
        }
        let gains = names.into_iter().zip(values.iter().copied()).collect();
        Ok(ControllerSpec { kind, gains, ranges })
    }

    pub fn gain(&self, name: &str) -> Result<f64, Error> {
        self.gains
            .get(name)
            .copied()
            .ok_or_else(|| config(format!("{} controller is missing gain '{name}'", self.kind)))
    }

    /// Checks names, finiteness and range membership.
    pub fn validate(&self, plant: &PlantModel) -> Result<(), Error> {
        for name in self.kind.gain_names(plant) {
            let v = self.gain(&name)?;
            if !v.is_finite() {
                return Err(config(format!("gain {name} is not finite")));
            }
            if let Some(r) = self.ranges.get(&name) {
                if !r.is_valid() {
                    return Err(config(format!("range for {name} must satisfy min < max")));
                }
                if !r.contains(v) {
                    return Err(config(format!("gain {name}={v} outside [{}, {}]", r.min, r.max)));
                }
            }
        }
        if self.gains.len() != self.kind.gain_names(plant).len() {
            return Err(config(format!("unexpected gains for a {} controller", self.kind)));
        }
        Ok(())
    }
}

/// Per-episode controller memory.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ControllerState {
    pub integral: f64,
    pub derivative: f64,
    pub prev_error: Option<f64>,
}

pub fn reset(_spec: &ControllerSpec) -> ControllerState {
    ControllerState::default()
}

/// A spec resolved against a plant, ready for the inner simulation loop.
#[derive(Clone, Copy, Debug)]
pub enum ControlLaw {
    Pid { kp: f64, ki: f64, kd: f64, limit: f64, regulated: usize },
    Fsf { k: [f64; MAX_DIM], idx: [usize; MAX_DIM], n: usize, regulated: usize },
}

impl ControlLaw {
    pub fn compile(spec: &ControllerSpec, plant: &PlantModel) -> Result<ControlLaw, Error> {
        let regulated = plant.regulated_index();
        Ok(match spec.kind {
            ControllerKind::P => {
                ControlLaw::Pid { kp: spec.gain("Kp")?, ki: 0.0, kd: 0.0, limit: plant.input_limit(), regulated }
            }
            ControllerKind::PI => ControlLaw::Pid {
                kp: spec.gain("Kp")?,
                ki: spec.gain("Ki")?,
                kd: 0.0,
                limit: plant.input_limit(),
                regulated,
            },
            ControllerKind::PD => ControlLaw::Pid {
                kp: spec.gain("Kp")?,
                ki: 0.0,
                kd: spec.gain("Kd")?,
                limit: plant.input_limit(),
                regulated,
            },
            ControllerKind::PID => ControlLaw::Pid {
                kp: spec.gain("Kp")?,
                ki: spec.gain("Ki")?,
                kd: spec.gain("Kd")?,
                limit: plant.input_limit(),
                regulated,
            },
            ControllerKind::FSF => {
                let fb = plant.feedback_indices();
                let mut k = [0.0; MAX_DIM];
                let mut idx = [0; MAX_DIM];
                for (j, &i) in fb.iter().enumerate() {
                    k[j] = spec.gain(&format!("K{}", j + 1))?;
                    idx[j] = i;
                }
                ControlLaw::Fsf { k, idx, n: fb.len(), regulated }
            }
        })
    }

    /// One control update from a (possibly noisy) measurement.
    pub fn step(
        &self,
        cs: ControllerState,
        measurement: &PlantState,
        reference: f64,
        dt: f64,
    ) -> (f64, ControllerState) {
        match *self {
            ControlLaw::Pid { kp, ki, kd, limit, regulated } => {
                let e = reference - measurement[regulated];
                let mut next = cs;
                let mut u = kp * e;
                if ki != 0.0 {
                    let bound = ANTI_WINDUP_FACTOR * limit / ki.abs();
                    next.integral = (cs.integral + e * dt).clamp(-bound, bound);
                    u += ki * next.integral;
                }
                if kd != 0.0 {
                    if let Some(prev) = cs.prev_error {
                        let n = DERIVATIVE_FILTER_N;
                        next.derivative = (cs.derivative + n * (e - prev)) / (1.0 + n * dt);
                    }
                    u += kd * next.derivative;
                }
                next.prev_error = Some(e);
                (u, next)
            }
            ControlLaw::Fsf { k, idx, n, regulated } => {
                let mut u = 0.0;
                for j in 0..n {
                    let mut x = measurement[idx[j]];
                    if idx[j] == regulated {
                        x -= reference;
                    }
                    u -= k[j] * x;
                }
                (u, cs)
            }
        }
    }
}

/// Evaluates the control law once; compiles the spec on every call.
pub fn control_output(
    spec: &ControllerSpec,
    plant: &PlantModel,
    cs: ControllerState,
    measurement: &PlantState,
    reference: f64,
    dt: f64,
) -> Result<(f64, ControllerState), Error> {
    if !(dt > 0.0) {
        return Err(config("dt must be positive"));
    }
    if measurement.dim() != plant.dim() {
        return Err(config("measurement dimension does not match the plant"));
    }
    Ok(ControlLaw::compile(spec, plant)?.step(cs, measurement, reference, dt))
}

fn ranges(entries: &[(&str, f64, f64)]) -> Ranges {
    entries.iter().map(|(n, lo, hi)| (n.to_string(), GainRange::new(*lo, *hi))).collect()
}

/// Permissible gain box per controller kind and plant.
pub fn default_ranges(kind: ControllerKind, plant: PlantId) -> Result<Ranges, Error> {
    use ControllerKind::*;
    let r = match (plant, kind) {
        (PlantId::DcMotor, P) => ranges(&[("Kp", 10.0, 60.0)]),
        (PlantId::DcMotor, PI) => ranges(&[("Kp", 10.0, 60.0), ("Ki", 0.01, 15.0)]),
        (PlantId::DcMotor, PD) => ranges(&[("Kp", 10.0, 60.0), ("Kd", 0.01, 15.0)]),
        (PlantId::DcMotor, PID) => ranges(&[("Kp", 10.0, 60.0), ("Ki", 0.01, 20.0), ("Kd", 0.01, 30.0)]),
        (PlantId::DcMotor, FSF) => ranges(&[("K1", 0.01, 10.0), ("K2", 0.01, 100.0), ("K3", 0.01, 200.0)]),
        (PlantId::BallBeam, P) => ranges(&[("Kp", 0.01, 100.0)]),
        (PlantId::BallBeam, PI) => ranges(&[("Kp", 0.01, 100.0), ("Ki", 0.01, 50.0)]),
        (PlantId::BallBeam, PD) => ranges(&[("Kp", 0.01, 100.0), ("Kd", 0.01, 50.0)]),
        (PlantId::BallBeam, PID) => ranges(&[("Kp", 0.01, 100.0), ("Ki", 0.01, 50.0), ("Kd", 0.01, 50.0)]),
        (PlantId::BallBeam, FSF) => {
            ranges(&[("K1", 0.01, 12.495), ("K2", 0.01, 19.495), ("K3", 0.01, 69.995), ("K4", 0.01, 13.495)])
        }
        (PlantId::Pendulum, P) => ranges(&[("Kp", 2.0, 10.0)]),
        (PlantId::Pendulum, PI) => ranges(&[("Kp", 2.0, 10.0), ("Ki", 0.5, 3.0)]),
        (PlantId::Pendulum, PD) => ranges(&[("Kp", 2.0, 10.0), ("Kd", 0.05, 1.0)]),
        (PlantId::Pendulum, PID) => ranges(&[("Kp", 2.0, 10.0), ("Ki", 0.5, 3.0), ("Kd", 0.05, 1.0)]),
        (PlantId::Pendulum, FSF) => ranges(&[("K1", 1.0, 15.0), ("K2", 0.1, 2.0)]),
        (PlantId::DoublePendulum, FSF) => {
            ranges(&[("K1", 0.005, 1.0), ("K2", 5.0, 20.0), ("K3", 0.5, 3.0), ("K4", 1.0, 3.0)])
        }
        (PlantId::DoublePendulum, k) => return Err(config(format!("no default ranges for {k} on double_pendulum"))),
    };
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn dc() -> PlantModel {
        PlantModel::nominal(PlantId::DcMotor)
    }

    fn bb() -> PlantModel {
        PlantModel::nominal(PlantId::BallBeam)
    }

    #[test]
    fn proportional_on_position_error() {
        let spec = ControllerSpec::with_gains(ControllerKind::P, &dc(), &[12.75]).unwrap();
        let x = PlantState::from_slice(&[0.0, 0.0, -core::f64::consts::PI]);
        let (u, _) = control_output(&spec, &dc(), reset(&spec), &x, 0.0, 0.01).unwrap();
        assert_relative_eq!(u, 12.75 * core::f64::consts::PI, max_relative = 1e-15);
        assert_relative_eq!(u, 40.055, epsilon = 1e-3);
        assert_eq!(dc().saturate(u), 24.0);
    }

    #[test]
    fn pid_at_rest_outputs_zero() {
        let spec = ControllerSpec::with_gains(ControllerKind::PID, &dc(), &[20.0, 1.0, 2.0]).unwrap();
        let (u, _) = control_output(&spec, &dc(), reset(&spec), &PlantState::zeros(3), 0.0, 0.01).unwrap();
        assert_eq!(u, 0.0);
    }

    #[test]
    fn fsf_unit_position() {
        let spec = ControllerSpec::with_gains(ControllerKind::FSF, &bb(), &[5.75, 9.5, 47.5, 5.75]).unwrap();
        let x = PlantState::from_slice(&[1.0, 0.0, 0.0, 0.0]);
        let (u, _) = control_output(&spec, &bb(), reset(&spec), &x, 0.0, 0.01).unwrap();
        assert_eq!(u, -5.75);
    }

    #[test]
    fn double_pendulum_gains_follow_position_then_rate_order() {
        let p = PlantModel::nominal(PlantId::DoublePendulum);
        let spec = ControllerSpec::with_gains(ControllerKind::FSF, &p, &[1.0, 10.0, 100.0, 1000.0]).unwrap();
        // State order is (θ1, θ̇1, θ2, θ̇2); K2 multiplies θ2.
        let x = PlantState::from_slice(&[0.0, 0.0, 1.0, 0.0]);
        let (u, _) = control_output(&spec, &p, reset(&spec), &x, 0.0, 0.01).unwrap();
        assert_eq!(u, -10.0);
    }

    #[test]
    fn dirty_derivative_first_steps() {
        // e goes 0 -> 1 at dt=0.01: d1 = (0 + 50*1)/(1 + 0.5).
        let spec = ControllerSpec::with_gains(ControllerKind::PD, &dc(), &[10.0, 1.0]).unwrap();
        let law = ControlLaw::compile(&spec, &dc()).unwrap();
        let (u0, s0) = law.step(reset(&spec), &PlantState::zeros(3), 0.0, 0.01);
        assert_eq!(u0, 0.0);
        let x = PlantState::from_slice(&[0.0, 0.0, -1.0]);
        let (u1, s1) = law.step(s0, &x, 0.0, 0.01);
        assert_relative_eq!(s1.derivative, 50.0 / 1.5, max_relative = 1e-15);
        assert_relative_eq!(u1, 10.0 + 50.0 / 1.5, max_relative = 1e-15);
    }

    #[test]
    fn missing_gain_is_config_error() {
        let mut spec = ControllerSpec::with_gains(ControllerKind::PI, &dc(), &[20.0, 1.0]).unwrap();
        spec.gains = [("Kp".to_string(), 20.0)].into_iter().collect();
        let r = control_output(&spec, &dc(), ControllerState::default(), &PlantState::zeros(3), 0.0, 0.01);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn logged_default_ranges() {
        let r = default_ranges(ControllerKind::P, PlantId::DcMotor).unwrap();
        assert_eq!(r.get("Kp"), Some(&GainRange::new(10.0, 60.0)));
        let r = default_ranges(ControllerKind::FSF, PlantId::BallBeam).unwrap();
        let v: Vec<_> = r.values().map(|g| (g.min, g.max)).collect();
        assert_eq!(v, [(0.01, 12.495), (0.01, 19.495), (0.01, 69.995), (0.01, 13.495)]);
        let r = default_ranges(ControllerKind::PID, PlantId::BallBeam).unwrap();
        let v: Vec<_> = r.iter().map(|(n, g)| (n, g.min, g.max)).collect();
        assert_eq!(v, [("Kp", 0.01, 100.0), ("Ki", 0.01, 50.0), ("Kd", 0.01, 50.0)]);
        assert!(default_ranges(ControllerKind::PID, PlantId::DoublePendulum).is_err());
    }

    #[test]
    fn param_map_keeps_document_order() {
        let g: Gains = serde_json::from_str(r#"{"K3": 1.0, "K1": 2.0, "K2": 3.0}"#).unwrap();
        assert_eq!(g.names().collect::<Vec<_>>(), ["K3", "K1", "K2"]);
        assert_eq!(serde_json::to_string(&g).unwrap(), r#"{"K3":1.0,"K1":2.0,"K2":3.0}"#);
        let r: Ranges = serde_json::from_str(r#"{"Kp": [10.0, 60.0]}"#).unwrap();
        assert_eq!(r.get("Kp").unwrap().max, 60.0);
    }

    #[test]
    fn validate_enforces_ranges() {
        let mut spec = ControllerSpec::with_gains(ControllerKind::P, &dc(), &[12.0]).unwrap();
        assert!(spec.validate(&dc()).is_ok());
        spec.gains.insert("Kp", 70.0);
        assert!(spec.validate(&dc()).is_err());
    }

    fn state4() -> impl Strategy<Value = [f64; 4]> {
        prop::array::uniform4(-10.0f64..10.0)
    }

    proptest! {
        #[test]
        fn fsf_is_linear_in_state(x in state4(), a in -5.0f64..5.0) {
            let spec = ControllerSpec::with_gains(ControllerKind::FSF, &bb(), &[5.75, 9.5, 47.5, 5.75]).unwrap();
            let law = ControlLaw::compile(&spec, &bb()).unwrap();
            let s = PlantState::from_slice(&x);
            let mut sa = s;
            for v in sa.as_mut_slice() { *v *= a; }
            let (u, _) = law.step(ControllerState::default(), &s, 0.0, 0.01);
            let (ua, _) = law.step(ControllerState::default(), &sa, 0.0, 0.01);
            prop_assert!((ua - a * u).abs() <= 1e-9 * (1.0 + ua.abs()));
        }

        #[test]
        fn fsf_gain_scaling(x in state4(), c in 0.01f64..10.0) {
            let base = [5.75, 9.5, 47.5, 5.75];
            let scaled: Vec<f64> = base.iter().map(|k| c * k).collect();
            let s = PlantState::from_slice(&x);
            let mut r1 = ControllerSpec::with_gains(ControllerKind::FSF, &bb(), &base).unwrap();
            r1.ranges = Ranges::new();
            let mut r2 = r1.clone();
            r2.gains = ["K1", "K2", "K3", "K4"].iter().map(|n| n.to_string()).zip(scaled).collect();
            let (u1, _) = ControlLaw::compile(&r1, &bb()).unwrap().step(ControllerState::default(), &s, 0.0, 0.01);
            let (u2, _) = ControlLaw::compile(&r2, &bb()).unwrap().step(ControllerState::default(), &s, 0.0, 0.01);
            prop_assert!((u2 - c * u1).abs() <= 1e-9 * (1.0 + u2.abs()));
        }

        #[test]
        fn pid_without_i_and_d_is_p(errs in prop::collection::vec(-100.0f64..100.0, 1..50), kp in 10.0f64..60.0) {
            let p = ControlLaw::compile(&ControllerSpec::with_gains(ControllerKind::P, &dc(), &[kp]).unwrap(), &dc()).unwrap();
            let mut pid_spec = ControllerSpec::with_gains(ControllerKind::PID, &dc(), &[kp, 1.0, 1.0]).unwrap();
            pid_spec.gains.insert("Ki", 0.0);
            pid_spec.gains.insert("Kd", 0.0);
            let pid = ControlLaw::compile(&pid_spec, &dc()).unwrap();
            let (mut sp, mut sq) = (ControllerState::default(), ControllerState::default());
            for e in errs {
                let x = PlantState::from_slice(&[0.0, 0.0, -e]);
                let (up, np) = p.step(sp, &x, 0.0, 0.01);
                let (uq, nq) = pid.step(sq, &x, 0.0, 0.01);
                prop_assert_eq!(up.to_bits(), uq.to_bits());
                sp = np; sq = nq;
            }
        }

        #[test]
        fn integral_respects_anti_windup(errs in prop::collection::vec(-1e3f64..1e3, 1..200), ki in 0.01f64..20.0) {
            let spec = ControllerSpec::with_gains(ControllerKind::PI, &dc(), &[10.0, 1.0]).unwrap();
            let mut spec = spec;
            spec.gains.insert("Ki", ki);
            let law = ControlLaw::compile(&spec, &dc()).unwrap();
            let bound = ANTI_WINDUP_FACTOR * dc().input_limit() / ki;
            let mut s = ControllerState::default();
            for e in errs {
                let x = PlantState::from_slice(&[0.0, 0.0, -e]);
                s = law.step(s, &x, 0.0, 0.1).1;
                prop_assert!(s.integral.abs() <= bound * (1.0 + 1e-12));
            }
        }
    }
}
