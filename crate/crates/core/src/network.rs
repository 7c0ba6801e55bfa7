//! Gas network description: topology, physical parameters and the fixed
//! intraday schedule of wells, loads and gas-fired units.
//!
//! Files are JSON documents in field units (lengths in km); [`GasNetwork`]
//! holds everything in SI units. Loading goes through [`RawNetwork`], which is
//! also what [`GasNetwork::to_raw`] produces, so a loaded network can be
//! written back out and re-read without change.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const KM: f64 = 1000.0;

/// Tolerance on the sum of participation factors before a warning is raised.
pub const PARTICIPATION_SUM_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompressorSpec {
    /// Compression ratio, fixed over the horizon.
    pub ratio: f64,
    /// Consumption multiplier.
    pub coeff_a: f64,
    /// Consumption exponent applied to the ratio.
    pub exponent_k: f64,
}

impl CompressorSpec {
    /// Fraction of the throughput burnt as fuel: `a * (ratio^k - 1)`.
    pub fn consumption_factor(&self) -> f64 {
        self.coeff_a * (self.ratio.powf(self.exponent_k) - 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub density_min: f64,
    pub density_max: f64,
    pub compressor: Option<CompressorSpec>,
}

impl Node {
    /// Density ratio applied to pipes leaving this node.
    pub fn boost(&self) -> f64 {
        self.compressor.map_or(1.0, |c| c.ratio)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pipe {
    pub id: String,
    pub from: usize,
    pub to: usize,
    /// Metres.
    pub length: f64,
    /// Metres.
    pub diameter: f64,
    pub friction: f64,
    /// Number of segmentation points, endpoints included.
    pub n_seg: usize,
}

impl Pipe {
    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.diameter * self.diameter / 4.0
    }

    /// `8 f / (pi^2 D^5)`, the friction coefficient multiplying `m^2 / rho`.
    pub fn friction_coefficient(&self) -> f64 {
        8.0 * self.friction / (std::f64::consts::PI.powi(2) * self.diameter.powi(5))
    }

    pub fn segment_length(&self) -> f64 {
        self.length / (self.n_seg - 1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GasWell {
    pub id: String,
    pub node: usize,
    /// Fixed output in kg/s. `None` means the output is whatever balances the
    /// network at the dispatch point (resolved when the initial state is built).
    pub output: Option<f64>,
    pub min_output: Option<f64>,
    pub max_output: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GasLoad {
    pub id: String,
    pub node: usize,
    pub demand: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GasFiredUnit {
    pub id: String,
    pub node: usize,
    /// Scheduled withdrawal in kg/s.
    pub dispatch: f64,
    pub participation: f64,
    /// Fuel use `d = fuel_slope * output + fuel_intercept`.
    pub fuel_slope: f64,
    pub fuel_intercept: f64,
}

impl GasFiredUnit {
    /// Electric output implied by a withdrawal.
    pub fn output_for(&self, withdrawal: f64) -> f64 {
        (withdrawal - self.fuel_intercept) / self.fuel_slope
    }
}

/// How the density gradient enters the momentum balance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentumScaling {
    /// `(rho_{s+1} - rho_s)/dx + 8f m^2 / (pi^2 D^5 rho) = 0`.
    #[default]
    Literal,
    /// Density gradient multiplied by the squared sound speed, i.e. the
    /// isothermal pressure gradient `alpha^2 d(rho)/dx`.
    SoundSpeedSquared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinepackForm {
    /// Stored mass, trapezoidal weights along each pipe.
    #[default]
    Mass,
    /// Every point weighted by `pi D^2 dx / (8 dt)` as the constraint is
    /// sometimes written; `linepack_min` must be given in the same units.
    PrintedRate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Globals {
    /// m/s.
    pub sound_speed: f64,
    /// kg (or kg/s for [`LinepackForm::PrintedRate`]).
    pub linepack_min: f64,
    pub momentum: MomentumScaling,
    pub linepack_form: LinepackForm,
    /// Node whose density anchors steady states.
    pub reference_node: usize,
    pub reference_density: f64,
}

/// How the state at the start of the horizon is produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialSpec {
    /// Density at the reference node in the prior steady state. Defaults to
    /// the global reference density.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_density: Option<f64>,
    /// Unit withdrawals in the prior steady state as a multiple of dispatch.
    #[serde(default = "one")]
    pub withdrawal_scale: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for InitialSpec {
    fn default() -> Self {
        Self {
            reference_density: None,
            withdrawal_scale: 1.0,
        }
    }
}

/// Static description of a gas network and its schedule.
///
/// Immutable after validation; share it freely between threads.
#[derive(Debug, Clone, PartialEq)]
pub struct GasNetwork {
    pub name: String,
    pub nodes: Vec<Node>,
    pub pipes: Vec<Pipe>,
    pub wells: Vec<GasWell>,
    pub loads: Vec<GasLoad>,
    pub units: Vec<GasFiredUnit>,
    pub globals: Globals,
    pub initial: InitialSpec,
}

// ---------------------------------------------------------------------------
// File schema

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawNode {
    pub id: String,
    pub density_min: f64,
    pub density_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPipe {
    pub id: String,
    pub from: String,
    pub to: String,
    /// km.
    pub length: f64,
    /// m.
    pub diameter: f64,
    pub friction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_seg: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawCompressor {
    pub node: String,
    pub ratio: f64,
    pub coeff_a: f64,
    pub exponent_k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawWell {
    pub id: String,
    pub node: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_output: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_output: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawLoad {
    pub id: String,
    pub node: String,
    pub demand: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawUnit {
    pub id: String,
    pub node: String,
    pub dispatch: f64,
    pub participation: f64,
    #[serde(default = "one")]
    pub fuel_slope: f64,
    #[serde(default)]
    pub fuel_intercept: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGlobals {
    pub sound_speed: f64,
    pub linepack_min: f64,
    #[serde(default)]
    pub momentum_scaling: MomentumScaling,
    #[serde(default)]
    pub linepack_form: LinepackForm,
    pub reference_node: String,
    pub reference_density: f64,
}

/// Network file contents, in file units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawNetwork {
    #[serde(default)]
    pub name: String,
    pub globals: RawGlobals,
    pub nodes: Vec<RawNode>,
    pub pipes: Vec<RawPipe>,
    #[serde(default)]
    pub compressors: Vec<RawCompressor>,
    #[serde(default)]
    pub wells: Vec<RawWell>,
    #[serde(default)]
    pub loads: Vec<RawLoad>,
    #[serde(default)]
    pub units: Vec<RawUnit>,
    #[serde(default)]
    pub initial: InitialSpec,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitOverride {
    #[serde(default)]
    pub dispatch: Option<f64>,
    #[serde(default)]
    pub participation: Option<f64>,
}

/// Schedule file: overrides applied on top of a network file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub wells: BTreeMap<String, f64>,
    #[serde(default)]
    pub loads: BTreeMap<String, f64>,
    #[serde(default)]
    pub units: BTreeMap<String, UnitOverride>,
    #[serde(default)]
    pub initial: Option<InitialSpec>,
    #[serde(default)]
    pub linepack_min: Option<f64>,
}

/// Default number of segmentation points: one every 10 km plus the endpoint.
pub fn default_segments(length_km: f64) -> usize {
    (length_km / 10.0).ceil() as usize + 1
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Loads and validates a network file.
pub fn load_network(path: impl AsRef<Path>) -> Result<GasNetwork> {
    let text = read_file(path.as_ref())?;
    GasNetwork::from_json(&text)
}

pub fn load_schedule(path: impl AsRef<Path>) -> Result<Schedule> {
    let text = read_file(path.as_ref())?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))
}

fn positive(path: String, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(path, format!("must be positive, got {value}")))
    }
}

fn non_negative(path: String, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::validation(path, format!("must be non-negative, got {value}")))
    }
}

impl RawNetwork {
    /// Converts to SI units and checks every invariant.
    pub fn normalize(&self) -> Result<GasNetwork> {
        let mut index = HashMap::new();
        let mut nodes = Vec::with_capacity(self.nodes.len());
        for (i, n) in self.nodes.iter().enumerate() {
            if index.insert(n.id.clone(), i).is_some() {
                return Err(Error::validation(format!("nodes[{i}].id"), format!("duplicate node id {}", n.id)));
            }
            positive(format!("nodes[{i}].density_min"), n.density_min)?;
            if !(n.density_min < n.density_max) {
                return Err(Error::validation(
                    format!("nodes[{i}].density_max"),
                    format!("density_min {} must be below density_max {}", n.density_min, n.density_max),
                ));
            }
            nodes.push(Node {
                id: n.id.clone(),
                density_min: n.density_min,
                density_max: n.density_max,
                compressor: None,
            });
        }
        if nodes.is_empty() {
            return Err(Error::validation("nodes", "network has no nodes"));
        }
        let lookup = |path: String, id: &str| -> Result<usize> {
            index
                .get(id)
                .copied()
                .ok_or_else(|| Error::validation(path, format!("unknown node {id}")))
        };

        let mut pipes = Vec::with_capacity(self.pipes.len());
        let mut pipe_ids = HashSet::new();
        for (i, p) in self.pipes.iter().enumerate() {
            if !pipe_ids.insert(p.id.as_str()) {
                return Err(Error::validation(format!("pipes[{i}].id"), format!("duplicate pipe id {}", p.id)));
            }
            let from = lookup(format!("pipes[{i}].from"), &p.from)?;
            let to = lookup(format!("pipes[{i}].to"), &p.to)?;
            if from == to {
                return Err(Error::validation(format!("pipes[{i}].to"), "pipe endpoints must differ"));
            }
            positive(format!("pipes[{i}].length"), p.length)?;
            positive(format!("pipes[{i}].diameter"), p.diameter)?;
            positive(format!("pipes[{i}].friction"), p.friction)?;
            let n_seg = p.n_seg.unwrap_or_else(|| default_segments(p.length));
            if n_seg < 2 {
                return Err(Error::validation(format!("pipes[{i}].n_seg"), "at least 2 segmentation points required"));
            }
            pipes.push(Pipe {
                id: p.id.clone(),
                from,
                to,
                length: p.length * KM,
                diameter: p.diameter,
                friction: p.friction,
                n_seg,
            });
        }

        for (i, c) in self.compressors.iter().enumerate() {
            let node = lookup(format!("compressors[{i}].node"), &c.node)?;
            if !(c.ratio >= 1.0) || !c.ratio.is_finite() {
                return Err(Error::validation(format!("compressors[{i}].ratio"), format!("ratio must be >= 1, got {}", c.ratio)));
            }
            non_negative(format!("compressors[{i}].coeff_a"), c.coeff_a)?;
            if !c.exponent_k.is_finite() {
                return Err(Error::validation(format!("compressors[{i}].exponent_k"), "must be finite"));
            }
            if nodes[node].compressor.is_some() {
                return Err(Error::validation(format!("compressors[{i}].node"), format!("node {} already has a compressor", c.node)));
            }
            nodes[node].compressor = Some(CompressorSpec {
                ratio: c.ratio,
                coeff_a: c.coeff_a,
                exponent_k: c.exponent_k,
            });
        }

        let mut wells = Vec::new();
        for (i, w) in self.wells.iter().enumerate() {
            let node = lookup(format!("wells[{i}].node"), &w.node)?;
            if let (Some(lo), Some(hi)) = (w.min_output, w.max_output) {
                if lo > hi {
                    return Err(Error::validation(format!("wells[{i}].max_output"), "min_output exceeds max_output"));
                }
            }
            if let Some(out) = w.output {
                non_negative(format!("wells[{i}].output"), out)?;
                if w.min_output.is_some_and(|lo| out < lo) || w.max_output.is_some_and(|hi| out > hi) {
                    return Err(Error::validation(format!("wells[{i}].output"), format!("output {out} outside well bounds")));
                }
            }
            wells.push(GasWell {
                id: w.id.clone(),
                node,
                output: w.output,
                min_output: w.min_output,
                max_output: w.max_output,
            });
        }
        if let Some(i) = wells.iter().enumerate().filter(|(_, w)| w.output.is_none()).map(|(i, _)| i).nth(1) {
            return Err(Error::validation(format!("wells[{i}].output"), "at most one well may leave its output open"));
        }

        let mut loads = Vec::new();
        for (i, l) in self.loads.iter().enumerate() {
            let node = lookup(format!("loads[{i}].node"), &l.node)?;
            non_negative(format!("loads[{i}].demand"), l.demand)?;
            loads.push(GasLoad {
                id: l.id.clone(),
                node,
                demand: l.demand,
            });
        }

        let mut units = Vec::new();
        for (i, u) in self.units.iter().enumerate() {
            let node = lookup(format!("units[{i}].node"), &u.node)?;
            non_negative(format!("units[{i}].dispatch"), u.dispatch)?;
            non_negative(format!("units[{i}].participation"), u.participation)?;
            positive(format!("units[{i}].fuel_slope"), u.fuel_slope)?;
            if !u.fuel_intercept.is_finite() {
                return Err(Error::validation(format!("units[{i}].fuel_intercept"), "must be finite"));
            }
            units.push(GasFiredUnit {
                id: u.id.clone(),
                node,
                dispatch: u.dispatch,
                participation: u.participation,
                fuel_slope: u.fuel_slope,
                fuel_intercept: u.fuel_intercept,
            });
        }

        let g = &self.globals;
        positive("globals.sound_speed".into(), g.sound_speed)?;
        non_negative("globals.linepack_min".into(), g.linepack_min)?;
        positive("globals.reference_density".into(), g.reference_density)?;
        let reference_node = lookup("globals.reference_node".into(), &g.reference_node)?;
        if let Some(rho) = self.initial.reference_density {
            positive("initial.reference_density".into(), rho)?;
        }
        non_negative("initial.withdrawal_scale".into(), self.initial.withdrawal_scale)?;

        let net = GasNetwork {
            name: self.name.clone(),
            nodes,
            pipes,
            wells,
            loads,
            units,
            globals: Globals {
                sound_speed: g.sound_speed,
                linepack_min: g.linepack_min,
                momentum: g.momentum_scaling,
                linepack_form: g.linepack_form,
                reference_node,
                reference_density: g.reference_density,
            },
            initial: self.initial.clone(),
        };
        net.check_connected()?;
        Ok(net)
    }
}

/// Per-node and total participation factors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticipationReport {
    pub total: f64,
    /// `(node id, sum of member-unit factors)`, nodes in file order.
    pub per_node: Vec<(String, f64)>,
    pub warning: Option<String>,
}

/// Sums participation factors overall and per node; warns when the total is
/// not one within [`PARTICIPATION_SUM_TOLERANCE`].
pub fn validate_participation(network: &GasNetwork) -> ParticipationReport {
    let total: f64 = network.units.iter().map(|u| u.participation).sum();
    let per_node = network
        .unit_nodes()
        .into_iter()
        .map(|j| {
            let beta = network.units.iter().filter(|u| u.node == j).map(|u| u.participation).sum();
            (network.nodes[j].id.clone(), beta)
        })
        .collect();
    let warning = ((total - 1.0).abs() > PARTICIPATION_SUM_TOLERANCE).then(|| {
        let msg = format!("participation factors sum to {total:.6}, expected 1");
        log::warn!("{msg}");
        msg
    });
    ParticipationReport {
        total,
        per_node,
        warning,
    }
}

impl GasNetwork {
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawNetwork = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        raw.normalize()
    }

    /// Back to file units.
    pub fn to_raw(&self) -> RawNetwork {
        let id = |j: usize| self.nodes[j].id.clone();
        RawNetwork {
            name: self.name.clone(),
            globals: RawGlobals {
                sound_speed: self.globals.sound_speed,
                linepack_min: self.globals.linepack_min,
                momentum_scaling: self.globals.momentum,
                linepack_form: self.globals.linepack_form,
                reference_node: id(self.globals.reference_node),
                reference_density: self.globals.reference_density,
            },
            nodes: self
                .nodes
                .iter()
                .map(|n| RawNode {
                    id: n.id.clone(),
                    density_min: n.density_min,
                    density_max: n.density_max,
                })
                .collect(),
            pipes: self
                .pipes
                .iter()
                .map(|p| RawPipe {
                    id: p.id.clone(),
                    from: id(p.from),
                    to: id(p.to),
                    length: p.length / KM,
                    diameter: p.diameter,
                    friction: p.friction,
                    n_seg: Some(p.n_seg),
                })
                .collect(),
            compressors: self
                .nodes
                .iter()
                .filter_map(|n| {
                    n.compressor.map(|c| RawCompressor {
                        node: n.id.clone(),
                        ratio: c.ratio,
                        coeff_a: c.coeff_a,
                        exponent_k: c.exponent_k,
                    })
                })
                .collect(),
            wells: self
                .wells
                .iter()
                .map(|w| RawWell {
                    id: w.id.clone(),
                    node: id(w.node),
                    output: w.output,
                    min_output: w.min_output,
                    max_output: w.max_output,
                })
                .collect(),
            loads: self
                .loads
                .iter()
                .map(|l| RawLoad {
                    id: l.id.clone(),
                    node: id(l.node),
                    demand: l.demand,
                })
                .collect(),
            units: self
                .units
                .iter()
                .map(|u| RawUnit {
                    id: u.id.clone(),
                    node: id(u.node),
                    dispatch: u.dispatch,
                    participation: u.participation,
                    fuel_slope: u.fuel_slope,
                    fuel_intercept: u.fuel_intercept,
                })
                .collect(),
            initial: self.initial.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_raw()).expect("network serializes")
    }

    /// Returns a copy with schedule overrides applied and re-validated.
    pub fn with_schedule(&self, schedule: &Schedule) -> Result<Self> {
        let mut raw = self.to_raw();
        for (id, out) in &schedule.wells {
            let w = raw
                .wells
                .iter_mut()
                .find(|w| &w.id == id)
                .ok_or_else(|| Error::validation(format!("schedule.wells.{id}"), "unknown well"))?;
            w.output = Some(*out);
        }
        for (id, demand) in &schedule.loads {
            let l = raw
                .loads
                .iter_mut()
                .find(|l| &l.id == id)
                .ok_or_else(|| Error::validation(format!("schedule.loads.{id}"), "unknown load"))?;
            l.demand = *demand;
        }
        for (id, o) in &schedule.units {
            let u = raw
                .units
                .iter_mut()
                .find(|u| &u.id == id)
                .ok_or_else(|| Error::validation(format!("schedule.units.{id}"), "unknown unit"))?;
            if let Some(d) = o.dispatch {
                u.dispatch = d;
            }
            if let Some(b) = o.participation {
                u.participation = b;
            }
        }
        if let Some(init) = &schedule.initial {
            raw.initial = init.clone();
        }
        if let Some(l) = schedule.linepack_min {
            raw.globals.linepack_min = l;
        }
        if !schedule.name.is_empty() {
            raw.name = if raw.name.is_empty() {
                schedule.name.clone()
            } else {
                format!("{}/{}", raw.name, schedule.name)
            };
        }
        raw.normalize()
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn pipes_from(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.pipes.iter().enumerate().filter(move |(_, p)| p.from == node).map(|(i, _)| i)
    }

    pub fn pipes_to(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.pipes.iter().enumerate().filter(move |(_, p)| p.to == node).map(|(i, _)| i)
    }

    /// Nodes hosting at least one gas-fired unit, ascending.
    pub fn unit_nodes(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.units.iter().map(|u| u.node).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Unit withdrawals `d_u = dispatch_u + beta_u * d_g`.
    pub fn withdrawals(&self, d_g: f64) -> Vec<f64> {
        self.units.iter().map(|u| u.dispatch + u.participation * d_g).collect()
    }

    pub fn dispatch(&self) -> Vec<f64> {
        self.withdrawals(0.0)
    }

    pub fn max_boost(&self) -> f64 {
        self.nodes.iter().map(Node::boost).fold(1.0, f64::max)
    }

    fn check_connected(&self) -> Result<()> {
        let n = self.nodes.len();
        let mut adj = vec![Vec::new(); n];
        for p in &self.pipes {
            adj[p.from].push(p.to);
            adj[p.to].push(p.from);
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(j) = queue.pop_front() {
            for &k in &adj[j] {
                if !seen[k] {
                    seen[k] = true;
                    queue.push_back(k);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            None => Ok(()),
            Some(j) => Err(Error::validation(
                format!("nodes[{j}]"),
                format!("node {} is not connected to the network", self.nodes[j].id),
            )),
        }
    }
}
