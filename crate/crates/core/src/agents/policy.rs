//! Manager/subpolicy network over triple-modal observations.
//!
//! Three modality encoders feed a shared feature vector. Every head (manager,
//! content heads, optional value) owns a separate fully connected trunk on top
//! of those features. An action is scored as the sum over the decisions that
//! compose it: macro then content for the hierarchical structures, one
//! 822-way choice for the flat one.

use ndarray::{s, Array2};
use rand::Rng;

use super::net::{log_softmax, Mlp, MlpTrace};
use crate::action_space::{
    Action, MacroAction, MouseTarget, NUM_ACTIONS, NUM_HOTKEYS, NUM_INTERACTIONS, NUM_MACROS,
    NUM_META, NUM_REGIONS, NUM_SINGLE_KEYS, NUM_SUBREGIONS,
};
use crate::error::{Error, Result};
use crate::state_encoder::{Observation, VISION_DIM};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Structure {
    Hierarchical,
    Flat,
    /// Hierarchical, with the mouse subregion conditioned on the chosen region
    /// and the interaction on both.
    MultiStepMouse,
}

impl Structure {
    pub fn as_str(self) -> &'static str {
        match self {
            Structure::Hierarchical => "hierarchical",
            Structure::Flat => "flat",
            Structure::MultiStepMouse => "multistep-mouse",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "hierarchical" | "hier" => Ok(Structure::Hierarchical),
            "flat" => Ok(Structure::Flat),
            "multistep-mouse" => Ok(Structure::MultiStepMouse),
            other => Err(Error::Config(format!("unknown agent.structure {other:?}"))),
        }
    }

    pub fn heads(self) -> &'static [HeadKind] {
        match self {
            Structure::Flat => &[HeadKind::Flat],
            _ => &[
                HeadKind::Manager,
                HeadKind::Single,
                HeadKind::Hot,
                HeadKind::Meta,
                HeadKind::Region,
                HeadKind::Subregion,
                HeadKind::Interaction,
            ],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HeadKind {
    Manager,
    Single,
    Hot,
    Meta,
    Region,
    Subregion,
    Interaction,
    Flat,
    Value,
}

impl HeadKind {
    pub fn size(self) -> usize {
        match self {
            HeadKind::Manager => NUM_MACROS,
            HeadKind::Single => NUM_SINGLE_KEYS,
            HeadKind::Hot => NUM_HOTKEYS,
            HeadKind::Meta => NUM_META,
            HeadKind::Region => NUM_REGIONS,
            HeadKind::Subregion => NUM_SUBREGIONS,
            HeadKind::Interaction => NUM_INTERACTIONS,
            HeadKind::Flat => NUM_ACTIONS,
            HeadKind::Value => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            HeadKind::Manager => "manager",
            HeadKind::Single => "single",
            HeadKind::Hot => "hot",
            HeadKind::Meta => "meta",
            HeadKind::Region => "region",
            HeadKind::Subregion => "subregion",
            HeadKind::Interaction => "interaction",
            HeadKind::Flat => "flat",
            HeadKind::Value => "value",
        }
    }

    fn content_of(m: MacroAction) -> Self {
        match m {
            MacroAction::SingleKey => HeadKind::Single,
            MacroAction::HotKey => HeadKind::Hot,
            MacroAction::Meta => HeadKind::Meta,
            MacroAction::Mouse => HeadKind::Region,
        }
    }
}

/// Earlier mouse choices a head is conditioned on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Cond {
    #[default]
    None,
    Region(usize),
    Cell(usize, usize),
}

fn cond_dim(structure: Structure, kind: HeadKind) -> usize {
    match (structure, kind) {
        (Structure::MultiStepMouse, HeadKind::Subregion) => NUM_REGIONS,
        (Structure::MultiStepMouse, HeadKind::Interaction) => NUM_REGIONS + NUM_SUBREGIONS,
        _ => 0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Decision {
    pub head: HeadKind,
    pub index: usize,
    pub cond: Cond,
}

/// Internal decisions that select `action` under `structure`.
pub fn decisions(structure: Structure, action: Action) -> Vec<Decision> {
    let d = |head, index| Decision { head, index, cond: Cond::None };
    if structure == Structure::Flat {
        return vec![d(HeadKind::Flat, action.flatten())];
    }
    let m = action.macro_action();
    let mut out = vec![d(HeadKind::Manager, m.index())];
    match action {
        Action::Mouse(t) => {
            let (r, sub, i) = (t.region(), t.subregion(), t.interaction());
            let multi = structure == Structure::MultiStepMouse;
            out.push(d(HeadKind::Region, r));
            out.push(Decision {
                head: HeadKind::Subregion,
                index: sub,
                cond: if multi { Cond::Region(r) } else { Cond::None },
            });
            out.push(Decision {
                head: HeadKind::Interaction,
                index: i,
                cond: if multi { Cond::Cell(r, sub) } else { Cond::None },
            });
        }
        other => out.push(d(HeadKind::content_of(m), other.content_index())),
    }
    out
}

/// Layer widths. Defaults give roughly 9M parameters for the hierarchical
/// structure.
#[derive(Clone, Debug, PartialEq)]
pub struct NetConfig {
    pub vision_hidden: usize,
    pub task_id_dim: usize,
    pub description_hidden: usize,
    pub numeric_hidden: usize,
    pub trunk: Vec<usize>,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            vision_hidden: 1024,
            task_id_dim: 32,
            description_hidden: 32,
            numeric_hidden: 64,
            trunk: vec![512, 512, 512],
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        let widths = [self.vision_hidden, self.task_id_dim, self.description_hidden, self.numeric_hidden];
        if widths.contains(&0) || self.trunk.contains(&0) {
            return Err(Error::Config("network widths must be positive".into()));
        }
        Ok(())
    }
}

/// Everything needed to rebuild a policy's shape.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicySpec {
    pub structure: Structure,
    pub net: NetConfig,
    pub embed_dim: usize,
    pub numeric_len: usize,
    pub num_tasks: usize,
    pub value_head: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Head {
    pub kind: HeadKind,
    pub net: Mlp,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    spec: PolicySpec,
    vision: Mlp,
    task_table: Array2<f64>,
    description: Option<Mlp>,
    numeric: Mlp,
    heads: Vec<Head>,
}

/// Encoder activations for a batch of observations.
#[derive(Clone, Debug)]
pub struct Encoded {
    pub features: Array2<f64>,
    vision: MlpTrace,
    description: Option<MlpTrace>,
    numeric: MlpTrace,
    task_ids: Vec<usize>,
}

impl Encoded {
    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One head applied to a subset of batch rows.
#[derive(Clone, Debug)]
pub struct HeadPass {
    pub kind: HeadKind,
    pub rows: Vec<usize>,
    trace: MlpTrace,
}

impl HeadPass {
    pub fn output(&self) -> &Array2<f64> {
        self.trace.output()
    }
}

/// A head pass plus the index chosen in each of its rows.
#[derive(Clone, Debug)]
pub struct HeadEval {
    pub pass: HeadPass,
    pub indices: Vec<usize>,
}

/// Outcome of choosing one action by walking the decision sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct Walk {
    pub action: Action,
    /// Sum of the chosen head outputs (a Q-value for value-based agents).
    pub score: f64,
    /// Sum of log-probabilities of the chosen indices under softmax.
    pub log_prob: f64,
}

/// All head outputs for one observation. Conditioned heads are evaluated at
/// the greedy choices of the heads before them.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadOutputs {
    pub heads: Vec<(HeadKind, Vec<f64>)>,
    pub value: Option<f64>,
}

impl HeadOutputs {
    pub fn get(&self, kind: HeadKind) -> Option<&[f64]> {
        self.heads.iter().find(|(k, _)| *k == kind).map(|(_, v)| v.as_slice())
    }
}

pub type Chooser<'a> = dyn FnMut(usize, HeadKind, &[f64]) -> usize + 'a;

impl Policy {
    pub fn new<R: Rng + ?Sized>(spec: PolicySpec, rng: &mut R) -> Result<Self> {
        spec.net.validate()?;
        if spec.num_tasks == 0 {
            return Err(Error::Config("policy needs at least one task id".into()));
        }
        let n = &spec.net;
        let vision = Mlp::new(&[VISION_DIM, n.vision_hidden], true, rng);
        let task_table = Array2::from_shape_fn((spec.num_tasks, n.task_id_dim), |_| rng.gen_range(-0.1..0.1));
        let description = (spec.embed_dim > 0)
            .then(|| Mlp::new(&[spec.embed_dim, n.description_hidden], true, rng));
        let numeric = Mlp::new(&[spec.numeric_len, n.numeric_hidden, n.numeric_hidden], true, rng);
        let features = Self::feature_dim_of(&spec);
        let mut kinds: Vec<HeadKind> = spec.structure.heads().to_vec();
        if spec.value_head {
            kinds.push(HeadKind::Value);
        }
        let heads = kinds
            .into_iter()
            .map(|kind| {
                let mut sizes = vec![features + cond_dim(spec.structure, kind)];
                sizes.extend_from_slice(&n.trunk);
                sizes.push(kind.size());
                Head { kind, net: Mlp::new(&sizes, false, rng) }
            })
            .collect();
        Ok(Self {
            spec,
            vision,
            task_table,
            description,
            numeric,
            heads,
        })
    }

    fn feature_dim_of(spec: &PolicySpec) -> usize {
        let n = &spec.net;
        n.vision_hidden
            + n.task_id_dim
            + if spec.embed_dim > 0 { n.description_hidden } else { 0 }
            + n.numeric_hidden
    }

    pub fn spec(&self) -> &PolicySpec {
        &self.spec
    }

    pub fn structure(&self) -> Structure {
        self.spec.structure
    }

    pub fn feature_dim(&self) -> usize {
        Self::feature_dim_of(&self.spec)
    }

    pub fn has_value_head(&self) -> bool {
        self.spec.value_head
    }

    /// Same shape, every parameter zero. Used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.fill_zero();
        z
    }

    pub fn fill_zero(&mut self) {
        self.visit_mut(&mut |s| s.fill(0.0));
    }

    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |s| n += s.len());
        n
    }

    /// Parameter blocks in a fixed order: vision, task table, description,
    /// numeric, then each head.
    pub fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        self.vision.visit(f);
        f(self.task_table.as_slice().expect("standard layout"));
        if let Some(d) = &self.description {
            d.visit(f);
        }
        self.numeric.visit(f);
        for h in &self.heads {
            h.net.visit(f);
        }
    }

    pub fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.vision.visit_mut(f);
        f(self.task_table.as_slice_mut().expect("standard layout"));
        if let Some(d) = &mut self.description {
            d.visit_mut(f);
        }
        self.numeric.visit_mut(f);
        for h in &mut self.heads {
            h.net.visit_mut(f);
        }
    }

    /// Visits matching blocks of `self` and a same-shaped `other`.
    pub fn visit_pair_mut(&mut self, other: &Policy, f: &mut dyn FnMut(&mut [f64], &[f64])) {
        self.vision.visit_pair_mut(&other.vision, f);
        f(
            self.task_table.as_slice_mut().expect("standard layout"),
            other.task_table.as_slice().expect("standard layout"),
        );
        if let (Some(d), Some(o)) = (&mut self.description, &other.description) {
            d.visit_pair_mut(o, f);
        }
        self.numeric.visit_pair_mut(&other.numeric, f);
        for (h, o) in self.heads.iter_mut().zip(&other.heads) {
            h.net.visit_pair_mut(&o.net, f);
        }
    }

    /// `(name, length)` for every block, in [`Policy::visit`] order.
    pub fn manifest(&self) -> Vec<(String, usize)> {
        fn mlp(out: &mut Vec<(String, usize)>, prefix: &str, net: &Mlp) {
            for (i, l) in net.layers.iter().enumerate() {
                out.push((format!("{prefix}.{i}.w[{}x{}]", l.inputs(), l.outputs()), l.w.len()));
                out.push((format!("{prefix}.{i}.b[{}]", l.outputs()), l.b.len()));
            }
        }
        let mut out = Vec::new();
        mlp(&mut out, "vision", &self.vision);
        let (r, c) = self.task_table.dim();
        out.push((format!("task_table[{r}x{c}]"), self.task_table.len()));
        if let Some(d) = &self.description {
            mlp(&mut out, "description", d);
        }
        mlp(&mut out, "numeric", &self.numeric);
        for h in &self.heads {
            mlp(&mut out, &format!("head.{}", h.kind.name()), &h.net);
        }
        out
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        self.visit(&mut |s| v.extend_from_slice(s));
        v
    }

    pub fn load_flat(&mut self, values: &[f64]) -> Result<()> {
        let n = self.param_count();
        if values.len() != n {
            return Err(Error::Shape { expected: n, actual: values.len() });
        }
        let mut k = 0;
        self.visit_mut(&mut |s| {
            s.copy_from_slice(&values[k..k + s.len()]);
            k += s.len();
        });
        Ok(())
    }

    /// `self += scale * other`, for parameter sets of identical shape.
    pub fn add_scaled(&mut self, other: &Policy, scale: f64) {
        self.visit_pair_mut(other, &mut |s, o| {
            s.iter_mut().zip(o).for_each(|(x, y)| *x += scale * y);
        });
    }

    fn head(&self, kind: HeadKind) -> &Head {
        self.heads
            .iter()
            .find(|h| h.kind == kind)
            .unwrap_or_else(|| panic!("policy has no {} head", kind.name()))
    }

    fn head_index(&self, kind: HeadKind) -> usize {
        self.heads.iter().position(|h| h.kind == kind).expect("head present")
    }

    pub fn check_observation(&self, obs: &Observation) -> Result<()> {
        let checks = [
            (VISION_DIM, obs.vision.len()),
            (self.spec.embed_dim, obs.task_vec.len()),
            (self.spec.numeric_len, obs.numeric.len()),
        ];
        for (expected, actual) in checks {
            if expected != actual {
                return Err(Error::Shape { expected, actual });
            }
        }
        if obs.task_id as usize >= self.spec.num_tasks {
            return Err(Error::Range {
                what: "task id",
                value: i64::from(obs.task_id),
                bound: self.spec.num_tasks as i64,
            });
        }
        Ok(())
    }

    pub fn encode(&self, batch: &[&Observation]) -> Result<Encoded> {
        for o in batch {
            self.check_observation(o)?;
        }
        let n = batch.len();
        let fill = |width: usize, get: &dyn Fn(&Observation) -> &[f64]| {
            let mut m = Array2::<f64>::zeros((n, width));
            for (i, o) in batch.iter().enumerate() {
                m.row_mut(i)
                    .as_slice_mut()
                    .expect("row of standard matrix")
                    .copy_from_slice(get(o));
            }
            m
        };
        let vision = self.vision.forward_trace(fill(VISION_DIM, &|o| &o.vision));
        let description = self
            .description
            .as_ref()
            .map(|d| d.forward_trace(fill(self.spec.embed_dim, &|o| &o.task_vec)));
        let numeric = self.numeric.forward_trace(fill(self.spec.numeric_len, &|o| &o.numeric));
        let task_ids: Vec<usize> = batch.iter().map(|o| o.task_id as usize).collect();

        let mut features = Array2::<f64>::zeros((n, self.feature_dim()));
        let mut col = 0;
        let mut put = |block: ndarray::ArrayView2<f64>| {
            let w = block.ncols();
            features.slice_mut(s![.., col..col + w]).assign(&block);
            col += w;
        };
        put(vision.output().view());
        let ids = Array2::from_shape_fn((n, self.spec.net.task_id_dim), |(i, j)| {
            self.task_table[[task_ids[i], j]]
        });
        put(ids.view());
        if let Some(d) = &description {
            put(d.output().view());
        }
        put(numeric.output().view());
        Ok(Encoded {
            features,
            vision,
            description,
            numeric,
            task_ids,
        })
    }

    pub fn encode_backward(&self, enc: &Encoded, d_features: &Array2<f64>, grads: &mut Policy) {
        let mut col = 0;
        let mut take = |w: usize| {
            let block = d_features.slice(s![.., col..col + w]).to_owned();
            col += w;
            block
        };
        let dv = take(self.spec.net.vision_hidden);
        self.vision.backward_params(&enc.vision, dv, &mut grads.vision);
        let did = take(self.spec.net.task_id_dim);
        for (i, &t) in enc.task_ids.iter().enumerate() {
            let mut row = grads.task_table.row_mut(t);
            row += &did.row(i);
        }
        if let (Some(net), Some(trace)) = (&self.description, &enc.description) {
            let dd = take(self.spec.net.description_hidden);
            net.backward_params(trace, dd, grads.description.as_mut().expect("same shape"));
        }
        let dn = take(self.spec.net.numeric_hidden);
        self.numeric.backward_params(&enc.numeric, dn, &mut grads.numeric);
    }

    fn head_input(&self, kind: HeadKind, enc: &Encoded, rows: &[usize], conds: &[Cond]) -> Array2<f64> {
        let f = self.feature_dim();
        let extra = cond_dim(self.spec.structure, kind);
        let mut x = Array2::<f64>::zeros((rows.len(), f + extra));
        for (j, &r) in rows.iter().enumerate() {
            x.slice_mut(s![j, ..f]).assign(&enc.features.row(r));
            if extra > 0 {
                match conds[j] {
                    Cond::Region(reg) => x[[j, f + reg]] = 1.0,
                    Cond::Cell(reg, sub) => {
                        x[[j, f + reg]] = 1.0;
                        x[[j, f + NUM_REGIONS + sub]] = 1.0;
                    }
                    Cond::None => {}
                }
            }
        }
        x
    }

    pub fn head_forward(&self, kind: HeadKind, enc: &Encoded, rows: &[usize], conds: &[Cond]) -> HeadPass {
        let x = self.head_input(kind, enc, rows, conds);
        HeadPass {
            kind,
            rows: rows.to_vec(),
            trace: self.head(kind).net.forward_trace(x),
        }
    }

    /// Backpropagates `d_out` through one head, accumulating into `grads` and
    /// adding the feature gradient into `d_features`.
    pub fn head_backward(
        &self,
        pass: &HeadPass,
        d_out: Array2<f64>,
        grads: &mut Policy,
        d_features: &mut Array2<f64>,
    ) {
        let h = self.head_index(pass.kind);
        let dx = self.heads[h]
            .net
            .backward(&pass.trace, d_out, &mut grads.heads[h].net);
        let f = self.feature_dim();
        for (j, &r) in pass.rows.iter().enumerate() {
            let mut row = d_features.row_mut(r);
            row += &dx.slice(s![j, ..f]);
        }
    }

    /// Value estimates for every row. Panics without a value head.
    pub fn value_forward(&self, enc: &Encoded) -> HeadPass {
        let rows: Vec<usize> = (0..enc.len()).collect();
        let conds = vec![Cond::None; rows.len()];
        self.head_forward(HeadKind::Value, enc, &rows, &conds)
    }

    /// Forward passes for the decisions composing each row's action.
    pub fn evaluate(&self, enc: &Encoded, actions: &[Action]) -> Vec<HeadEval> {
        let mut groups: Vec<(HeadKind, Vec<usize>, Vec<Cond>, Vec<usize>)> = Vec::new();
        for (row, a) in actions.iter().enumerate() {
            for d in decisions(self.spec.structure, *a) {
                let g = match groups.iter().position(|g| g.0 == d.head) {
                    Some(i) => i,
                    None => {
                        groups.push((d.head, Vec::new(), Vec::new(), Vec::new()));
                        groups.len() - 1
                    }
                };
                groups[g].1.push(row);
                groups[g].2.push(d.cond);
                groups[g].3.push(d.index);
            }
        }
        groups
            .into_iter()
            .map(|(kind, rows, conds, indices)| HeadEval {
                pass: self.head_forward(kind, enc, &rows, &conds),
                indices,
            })
            .collect()
    }

    fn choose_on(
        &self,
        kind: HeadKind,
        enc: &Encoded,
        rows: &[usize],
        conds: &[Cond],
        choose: &mut Chooser<'_>,
        acc: &mut [(f64, f64)],
    ) -> Vec<usize> {
        if rows.is_empty() {
            return Vec::new();
        }
        let pass = self.head_forward(kind, enc, rows, conds);
        let out = pass.output();
        rows.iter()
            .enumerate()
            .map(|(j, &r)| {
                let logits = out.row(j).to_vec();
                let idx = choose(r, kind, &logits);
                acc[r].0 += logits[idx];
                acc[r].1 += log_softmax(&logits)[idx];
                idx
            })
            .collect()
    }

    /// Picks one action per row by walking the decision sequence; `choose`
    /// receives `(row, head, outputs)` and returns an index into the outputs.
    pub fn walk(&self, enc: &Encoded, choose: &mut Chooser<'_>) -> Vec<Walk> {
        let n = enc.len();
        let all: Vec<usize> = (0..n).collect();
        let none = vec![Cond::None; n];
        let mut acc = vec![(0.0, 0.0); n];
        let mut actions = vec![Action::WAIT; n];

        if self.spec.structure == Structure::Flat {
            let idx = self.choose_on(HeadKind::Flat, enc, &all, &none, choose, &mut acc);
            for (r, i) in idx.into_iter().enumerate() {
                actions[r] = Action::unflatten(i).expect("flat head has 822 outputs");
            }
        } else {
            let macros = self.choose_on(HeadKind::Manager, enc, &all, &none, choose, &mut acc);
            for m in [MacroAction::SingleKey, MacroAction::HotKey, MacroAction::Meta] {
                let rows: Vec<usize> = all.iter().copied().filter(|&r| macros[r] == m.index()).collect();
                let kind = HeadKind::content_of(m);
                let idx = self.choose_on(kind, enc, &rows, &none[..rows.len()], choose, &mut acc);
                for (r, i) in rows.into_iter().zip(idx) {
                    actions[r] = Action::from_parts(m, i).expect("head size matches subspace");
                }
            }
            let rows: Vec<usize> = all
                .iter()
                .copied()
                .filter(|&r| macros[r] == MacroAction::Mouse.index())
                .collect();
            let k = rows.len();
            let multi = self.spec.structure == Structure::MultiStepMouse;
            let regions = self.choose_on(HeadKind::Region, enc, &rows, &none[..k], choose, &mut acc);
            let conds: Vec<Cond> = if multi {
                regions.iter().map(|&r| Cond::Region(r)).collect()
            } else {
                none[..k].to_vec()
            };
            let subs = self.choose_on(HeadKind::Subregion, enc, &rows, &conds, choose, &mut acc);
            let conds: Vec<Cond> = if multi {
                regions.iter().zip(&subs).map(|(&r, &s)| Cond::Cell(r, s)).collect()
            } else {
                none[..k].to_vec()
            };
            let inter = self.choose_on(HeadKind::Interaction, enc, &rows, &conds, choose, &mut acc);
            for (j, r) in rows.into_iter().enumerate() {
                actions[r] = Action::Mouse(
                    MouseTarget::new(regions[j], subs[j], inter[j]).expect("head sizes match grid"),
                );
            }
        }
        actions
            .into_iter()
            .zip(acc)
            .map(|(action, (score, log_prob))| Walk { action, score, log_prob })
            .collect()
    }

    /// Greedy action with ties broken toward the lowest index.
    pub fn greedy(&self, obs: &Observation) -> Result<Walk> {
        let enc = self.encode(&[obs])?;
        let mut pick = |_: usize, _: HeadKind, v: &[f64]| super::net::argmax(v);
        Ok(self.walk(&enc, &mut pick).remove(0))
    }

    /// Every head's outputs for one observation, plus the value if present.
    pub fn forward(&self, obs: &Observation) -> Result<HeadOutputs> {
        let enc = self.encode(&[obs])?;
        let mut heads = Vec::new();
        let mut record = |_: usize, kind: HeadKind, v: &[f64]| {
            heads.push((kind, v.to_vec()));
            super::net::argmax(v)
        };
        if self.spec.structure == Structure::Flat {
            self.walk(&enc, &mut record);
        } else {
            // Visit every content head regardless of the greedy macro.
            let none = [Cond::None];
            let mut conds = [Cond::None; 2];
            let mut region = 0;
            for kind in self.spec.structure.heads() {
                let cond = match kind {
                    HeadKind::Subregion => conds[0],
                    HeadKind::Interaction => conds[1],
                    _ => none[0],
                };
                let pass = self.head_forward(*kind, &enc, &[0], &[cond]);
                let v = pass.output().row(0).to_vec();
                let best = super::net::argmax(&v);
                if self.spec.structure == Structure::MultiStepMouse {
                    match kind {
                        HeadKind::Region => {
                            region = best;
                            conds[0] = Cond::Region(best);
                        }
                        HeadKind::Subregion => conds[1] = Cond::Cell(region, best),
                        _ => {}
                    }
                }
                record(0, *kind, &v);
            }
        }
        let value = self
            .spec
            .value_head
            .then(|| self.value_forward(&enc).output()[[0, 0]]);
        Ok(HeadOutputs { heads, value })
    }
}
