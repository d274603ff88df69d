//! Multilayer fabric heat-transfer model: material and environment constants,
//! the unit rescaling applied to network inputs and outputs, and evaluators
//! for the twelve residual terms of the coupled problem.
//!
//! Every residual is affine in the network output and its derivatives. The
//! scalar evaluators below are the readable form; [`term_form`] returns the
//! same residuals as coefficient vectors, which is what the training engine
//! consumes.

use std::fmt;

use crate::autodiff::{AffineResidual, DualState};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One of the three fabric layers, ordered from the flame side inwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LayerId {
    /// Outer shell, exposed to the hot gases.
    Shell,
    /// Moisture barrier.
    Barrier,
    /// Thermal liner, facing the skin-side air.
    Liner,
}

impl LayerId {
    pub const ALL: [LayerId; 3] = [LayerId::Shell, LayerId::Barrier, LayerId::Liner];

    pub fn index(self) -> usize {
        match self {
            LayerId::Shell => 0,
            LayerId::Barrier => 1,
            LayerId::Liner => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LayerId::Shell => "shl",
            LayerId::Barrier => "msr",
            LayerId::Liner => "lin",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        LayerId::ALL.into_iter().find(|l| l.name() == name)
    }
}

impl fmt::Display for LayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Thermophysical constants of one fabric layer, SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FabricLayer {
    /// kg/m³
    pub density: f64,
    /// J/(kg·K)
    pub specific_heat: f64,
    /// W/(m·K)
    pub conductivity: f64,
    /// m
    pub thickness: f64,
}

impl FabricLayer {
    /// Volumetric heat capacity ρ·c in J/(m³·K).
    pub fn apparent_heat_capacity(&self) -> f64 {
        self.density * self.specific_heat
    }

    /// Thermal diffusivity k/(ρc) in m²/s.
    pub fn diffusivity(&self) -> f64 {
        self.conductivity / self.apparent_heat_capacity()
    }

    fn validate(&self, name: &str) -> Result<()> {
        let fields = [
            ("density", self.density),
            ("specific_heat", self.specific_heat),
            ("conductivity", self.conductivity),
            ("thickness", self.thickness),
        ];
        for (field, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!(
                    "{name}.{field} must be finite and > 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Boundary and initial conditions plus the three layers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvironmentConfig {
    /// Normal (initial and skin-side ambient) temperature, K.
    pub t0: f64,
    /// Hot gas temperature, K.
    pub tg: f64,
    /// Flame-side convective coefficient, W/(m²·K).
    pub h_g: f64,
    /// Skin-side convective coefficient, W/(m²·K).
    pub h_air: f64,
    /// Simulated time span, s.
    pub horizon: f64,
    pub layers: [FabricLayer; 3],
}

impl EnvironmentConfig {
    /// The benchmark fabric and flash-fire environment, 60 s horizon.
    pub fn benchmark() -> Self {
        EnvironmentConfig {
            t0: 310.15,
            tg: 2000.0,
            h_g: 40.0,
            h_air: 9.496,
            horizon: 60.0,
            layers: [
                FabricLayer {
                    density: 300.0,
                    specific_heat: 1377.0,
                    conductivity: 0.082,
                    thickness: 0.6 / 1000.0,
                },
                FabricLayer {
                    density: 862.0,
                    specific_heat: 2100.0,
                    conductivity: 0.37,
                    thickness: 0.85 / 1000.0,
                },
                FabricLayer {
                    density: 74.2,
                    specific_heat: 1726.0,
                    conductivity: 0.045,
                    thickness: 3.6 / 1000.0,
                },
            ],
        }
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn layer(&self, id: LayerId) -> &FabricLayer {
        &self.layers[id.index()]
    }

    /// Total fabric thickness, m.
    pub fn l_fab(&self) -> f64 {
        self.layers[0].thickness + self.layers[1].thickness + self.layers[2].thickness
    }

    /// Shell/barrier interface abscissa, m.
    pub fn l_shl(&self) -> f64 {
        self.layers[0].thickness
    }

    /// Barrier/liner interface abscissa, m.
    pub fn l_msr(&self) -> f64 {
        self.layers[0].thickness + self.layers[1].thickness
    }

    /// Layer boundaries `[0, L_shl, L_msr, L_fab]` in metres.
    pub fn boundaries(&self) -> [f64; 4] {
        [0.0, self.l_shl(), self.l_msr(), self.l_fab()]
    }

    /// Layer boundaries in millimetres, the coordinates of the training grid.
    pub fn boundaries_mm(&self) -> [f64; 4] {
        self.boundaries().map(|x| x * 1e3)
    }

    pub fn validate(&self) -> Result<()> {
        for (id, layer) in LayerId::ALL.iter().zip(&self.layers) {
            layer.validate(id.name())?;
        }
        let positive = [
            ("h_g", self.h_g),
            ("h_air", self.h_air),
            ("horizon_s", self.horizon),
            ("T0_K", self.t0),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if !(self.tg.is_finite() && self.tg >= self.t0) {
            return Err(Error::Config(format!(
                "Tg_K ({}) must be finite and not below T0_K ({})",
                self.tg, self.t0
            )));
        }
        Ok(())
    }
}

/// Unit convention of the network coordinates: `x = x' · length_unit` and
/// `T = T' · temperature_unit`. Time is never rescaled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleConfig {
    /// Metres per network length unit.
    pub length_unit: f64,
    /// Kelvin per network temperature unit.
    pub temperature_unit: f64,
}

impl ScaleConfig {
    /// Millimetres in, kilokelvin out.
    pub const FORWARD_BALANCED: ScaleConfig = ScaleConfig {
        length_unit: 1e-3,
        temperature_unit: 1e3,
    };

    /// Metres in, kelvin out.
    pub const SI: ScaleConfig = ScaleConfig {
        length_unit: 1.0,
        temperature_unit: 1.0,
    };

    pub fn is_forward_balanced(&self) -> bool {
        *self == Self::FORWARD_BALANCED
    }

    /// Network length units per metre.
    pub fn inverse_length_unit(&self) -> f64 {
        1.0 / self.length_unit
    }

    /// `x' = x / length_unit`.
    pub fn scale_coordinate(&self, x_m: f64) -> f64 {
        x_m * self.inverse_length_unit()
    }

    /// Network length units per millimetre.
    pub fn millimetre_factor(&self) -> f64 {
        1e-3 * self.inverse_length_unit()
    }

    /// Network coordinate of a grid abscissa given in millimetres.
    pub fn from_millimetres(&self, x_mm: f64) -> f64 {
        x_mm * self.millimetre_factor()
    }

    pub fn unscale_coordinate(&self, x_scaled: f64) -> f64 {
        x_scaled * self.length_unit
    }

    /// `T = T' · temperature_unit`.
    pub fn unscale_prediction<T: Scalar>(&self, t_scaled: T) -> T {
        t_scaled * T::lit(self.temperature_unit)
    }

    pub fn scale_temperature(&self, t_kelvin: f64) -> f64 {
        t_kelvin / self.temperature_unit
    }

    /// Multiplier on `T'` terms (10³ under forward balance).
    pub fn value_factor(&self) -> f64 {
        self.temperature_unit
    }

    /// Multiplier on `∂T'/∂x'` terms (10⁶ under forward balance).
    pub fn gradient_factor(&self) -> f64 {
        self.temperature_unit * self.inverse_length_unit()
    }

    /// Multiplier on `∂²T'/∂x'²` terms (10⁹ under forward balance).
    pub fn curvature_factor(&self) -> f64 {
        self.temperature_unit * self.inverse_length_unit() * self.inverse_length_unit()
    }
}

impl Default for ScaleConfig {
    fn default() -> Self {
        Self::FORWARD_BALANCED
    }
}

/// Loss-magnitude class of a residual term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BalanceClass {
    /// Terms built from temperature values.
    C1,
    /// Terms built from first spatial derivatives.
    C2,
    /// PDE residuals, containing second spatial derivatives.
    C3,
}

impl BalanceClass {
    pub const ALL: [BalanceClass; 3] = [BalanceClass::C1, BalanceClass::C2, BalanceClass::C3];

    pub fn name(self) -> &'static str {
        match self {
            BalanceClass::C1 => "C1",
            BalanceClass::C2 => "C2",
            BalanceClass::C3 => "C3",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for BalanceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The two layer interfaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Interface {
    ShellBarrier,
    BarrierLiner,
}

impl Interface {
    pub fn sides(self) -> (LayerId, LayerId) {
        match self {
            Interface::ShellBarrier => (LayerId::Shell, LayerId::Barrier),
            Interface::BarrierLiner => (LayerId::Barrier, LayerId::Liner),
        }
    }
}

/// Sub-domain of the collocation set sampled by a residual term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Partition {
    Interior(LayerId),
    Initial(LayerId),
    OuterLeft,
    OuterRight,
    Interface(Interface),
}

/// The twelve residual terms of the composite loss, in summation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ResidualTerm {
    RShl,
    OShl,
    BShl,
    B1ShlMsr,
    B2ShlMsr,
    RMsr,
    OMsr,
    B1MsrLin,
    B2MsrLin,
    RLin,
    OLin,
    BLin,
}

impl ResidualTerm {
    pub const ALL: [ResidualTerm; 12] = [
        ResidualTerm::RShl,
        ResidualTerm::OShl,
        ResidualTerm::BShl,
        ResidualTerm::B1ShlMsr,
        ResidualTerm::B2ShlMsr,
        ResidualTerm::RMsr,
        ResidualTerm::OMsr,
        ResidualTerm::B1MsrLin,
        ResidualTerm::B2MsrLin,
        ResidualTerm::RLin,
        ResidualTerm::OLin,
        ResidualTerm::BLin,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn id(self) -> &'static str {
        use ResidualTerm::*;
        match self {
            RShl => "r_shl",
            RMsr => "r_msr",
            RLin => "r_lin",
            OShl => "o_shl",
            OMsr => "o_msr",
            OLin => "o_lin",
            BShl => "b_shl",
            BLin => "b_lin",
            B1ShlMsr => "b1_shl_msr",
            B2ShlMsr => "b2_shl_msr",
            B1MsrLin => "b1_msr_lin",
            B2MsrLin => "b2_msr_lin",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.id() == id)
    }

    pub fn class(self) -> BalanceClass {
        use ResidualTerm::*;
        match self {
            OShl | OMsr | OLin | B1ShlMsr | B1MsrLin => BalanceClass::C1,
            BShl | B2ShlMsr | B2MsrLin | BLin => BalanceClass::C2,
            RShl | RMsr | RLin => BalanceClass::C3,
        }
    }

    pub fn domain(self) -> Partition {
        use ResidualTerm::*;
        match self {
            RShl => Partition::Interior(LayerId::Shell),
            RMsr => Partition::Interior(LayerId::Barrier),
            RLin => Partition::Interior(LayerId::Liner),
            OShl => Partition::Initial(LayerId::Shell),
            OMsr => Partition::Initial(LayerId::Barrier),
            OLin => Partition::Initial(LayerId::Liner),
            BShl => Partition::OuterLeft,
            BLin => Partition::OuterRight,
            B1ShlMsr | B2ShlMsr => Partition::Interface(Interface::ShellBarrier),
            B1MsrLin | B2MsrLin => Partition::Interface(Interface::BarrierLiner),
        }
    }
}

impl fmt::Display for ResidualTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Heat equation residual `C^A ∂T/∂t − k ∂²T/∂x²`, evaluated from scaled
/// derivatives.
pub fn residual_interior<T: Scalar>(layer: &FabricLayer, d: &DualState<T>, scale: &ScaleConfig) -> T {
    T::lit(layer.apparent_heat_capacity()) * d.d_dt * T::lit(scale.value_factor())
        - T::lit(layer.conductivity) * d.d2_dx2 * T::lit(scale.curvature_factor())
}

/// Initial-condition residual `(T'|_{t=0} − T'_0) · 10³`.
pub fn residual_initial<T: Scalar>(layer_pred: T, t0_scaled: T, scale: &ScaleConfig) -> T {
    (layer_pred - t0_scaled) * T::lit(scale.value_factor())
}

/// Flame-side convective boundary at `x = 0`.
pub fn residual_outer_left<T: Scalar>(d: &DualState<T>, env: &EnvironmentConfig, scale: &ScaleConfig) -> T {
    let k = T::lit(env.layers[0].conductivity);
    let tg = T::lit(scale.scale_temperature(env.tg));
    -k * d.d_dx * T::lit(scale.gradient_factor())
        - T::lit(env.h_g) * (tg - d.value) * T::lit(scale.value_factor())
}

/// Skin-side convective boundary at `x = L_fab`.
pub fn residual_outer_right<T: Scalar>(d: &DualState<T>, env: &EnvironmentConfig, scale: &ScaleConfig) -> T {
    let k = T::lit(env.layers[2].conductivity);
    let t0 = T::lit(scale.scale_temperature(env.t0));
    -k * d.d_dx * T::lit(scale.gradient_factor())
        - T::lit(env.h_air) * (d.value - t0) * T::lit(scale.value_factor())
}

/// Temperature continuity across an interface.
pub fn residual_interface_temp<T: Scalar>(left_pred: T, right_pred: T, scale: &ScaleConfig) -> T {
    (left_pred - right_pred) * T::lit(scale.value_factor())
}

/// Heat-flux continuity across an interface.
pub fn residual_interface_flux<T: Scalar>(
    k_left: f64,
    d_left: &DualState<T>,
    k_right: f64,
    d_right: &DualState<T>,
    scale: &ScaleConfig,
) -> T {
    (T::lit(k_left) * d_left.d_dx - T::lit(k_right) * d_right.d_dx) * T::lit(scale.gradient_factor())
}

/// A residual term written as a sum of affine probes of the sub-networks.
///
/// Interface terms have two probes (one per adjacent sub-network) evaluated at
/// the same coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TermForm<T> {
    pub term: ResidualTerm,
    pub probes: Vec<(LayerId, AffineResidual<T>)>,
}

impl<T: Scalar> TermForm<T> {
    /// Evaluates the residual given one `DualState` per probe.
    pub fn eval(&self, states: &[DualState<T>]) -> T {
        debug_assert_eq!(states.len(), self.probes.len());
        self.probes
            .iter()
            .zip(states)
            .fold(T::zero(), |acc, ((_, c), d)| acc + c.apply(d))
    }
}

/// Coefficient form of `term` under the given environment and unit scaling.
pub fn term_form<T: Scalar>(term: ResidualTerm, env: &EnvironmentConfig, scale: &ScaleConfig) -> TermForm<T> {
    let tv = scale.value_factor();
    let tg = scale.gradient_factor();
    let tc = scale.curvature_factor();
    let value = |c: f64| AffineResidual {
        value: T::lit(c),
        ..AffineResidual::zero()
    };
    let slope = |c: f64| AffineResidual {
        d_dx: T::lit(c),
        ..AffineResidual::zero()
    };
    let interior = |layer: LayerId| {
        let l = env.layer(layer);
        TermForm {
            term,
            probes: vec![(
                layer,
                AffineResidual {
                    d_dt: T::lit(l.apparent_heat_capacity() * tv),
                    d2_dx2: T::lit(-l.conductivity * tc),
                    ..AffineResidual::zero()
                },
            )],
        }
    };
    let initial = |layer: LayerId| TermForm {
        term,
        probes: vec![(
            layer,
            AffineResidual {
                value: T::lit(tv),
                offset: T::lit(-scale.scale_temperature(env.t0) * tv),
                ..AffineResidual::zero()
            },
        )],
    };
    let temp_jump = |iface: Interface| {
        let (l, r) = iface.sides();
        TermForm {
            term,
            probes: vec![(l, value(tv)), (r, value(-tv))],
        }
    };
    let flux_jump = |iface: Interface| {
        let (l, r) = iface.sides();
        TermForm {
            term,
            probes: vec![
                (l, slope(env.layer(l).conductivity * tg)),
                (r, slope(-env.layer(r).conductivity * tg)),
            ],
        }
    };
    use ResidualTerm::*;
    match term {
        RShl => interior(LayerId::Shell),
        RMsr => interior(LayerId::Barrier),
        RLin => interior(LayerId::Liner),
        OShl => initial(LayerId::Shell),
        OMsr => initial(LayerId::Barrier),
        OLin => initial(LayerId::Liner),
        BShl => TermForm {
            term,
            probes: vec![(
                LayerId::Shell,
                AffineResidual {
                    value: T::lit(env.h_g * tv),
                    d_dx: T::lit(-env.layers[0].conductivity * tg),
                    offset: T::lit(-env.h_g * scale.scale_temperature(env.tg) * tv),
                    ..AffineResidual::zero()
                },
            )],
        },
        BLin => TermForm {
            term,
            probes: vec![(
                LayerId::Liner,
                AffineResidual {
                    value: T::lit(-env.h_air * tv),
                    d_dx: T::lit(-env.layers[2].conductivity * tg),
                    offset: T::lit(env.h_air * scale.scale_temperature(env.t0) * tv),
                    ..AffineResidual::zero()
                },
            )],
        },
        B1ShlMsr => temp_jump(Interface::ShellBarrier),
        B1MsrLin => temp_jump(Interface::BarrierLiner),
        B2ShlMsr => flux_jump(Interface::ShellBarrier),
        B2MsrLin => flux_jump(Interface::BarrierLiner),
    }
}

/// Residual of `term` from explicit per-probe states through the scalar
/// evaluators above. Used to cross-check [`term_form`].
pub fn residual_direct<T: Scalar>(
    term: ResidualTerm,
    states: &[DualState<T>],
    env: &EnvironmentConfig,
    scale: &ScaleConfig,
) -> T {
    let t0 = T::lit(scale.scale_temperature(env.t0));
    use ResidualTerm::*;
    match term {
        RShl => residual_interior(env.layer(LayerId::Shell), &states[0], scale),
        RMsr => residual_interior(env.layer(LayerId::Barrier), &states[0], scale),
        RLin => residual_interior(env.layer(LayerId::Liner), &states[0], scale),
        OShl | OMsr | OLin => residual_initial(states[0].value, t0, scale),
        BShl => residual_outer_left(&states[0], env, scale),
        BLin => residual_outer_right(&states[0], env, scale),
        B1ShlMsr | B1MsrLin => residual_interface_temp(states[0].value, states[1].value, scale),
        B2ShlMsr => residual_interface_flux(
            env.layers[0].conductivity,
            &states[0],
            env.layers[1].conductivity,
            &states[1],
            scale,
        ),
        B2MsrLin => residual_interface_flux(
            env.layers[1].conductivity,
            &states[0],
            env.layers[2].conductivity,
            &states[1],
            scale,
        ),
    }
}
