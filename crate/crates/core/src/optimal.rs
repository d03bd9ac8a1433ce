//! Exact min-max channel allocation.
//!
//! The objective is the largest path airtime over all active paths. In
//! `Fixed` mode every (link, channel) cost is a constant; in `Coupled` mode
//! costs are recomputed from the whole assignment, so the solver searches
//! the joint space. Branch and bound visits assignments in lexicographic
//! order and returns the same tie-broken optimum as plain enumeration.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::airtime::Airtime;
use crate::assignment::{ChannelAssignment, CostModel};
use crate::error::{Error, Result};
use crate::topology::{ChannelId, LinkId, MeshTopology, NodeId, RadioLimits};

/// Values closer than this are treated as ties.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostMode {
    Fixed,
    Coupled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub mode: CostMode,
    /// largest |F|^|links| plain enumeration will attempt
    pub enumeration_limit: f64,
    pub branch_and_bound: bool,
    /// search nodes before branch and bound gives up
    pub node_limit: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { mode: CostMode::Coupled, enumeration_limit: 2e7, branch_and_bound: true, node_limit: 50_000_000 }
    }
}

#[derive(Debug, Clone)]
pub struct CoupledCosts {
    pub model: CostModel,
    /// (tx, rx) of each problem link, for radio feasibility
    pub endpoints: Vec<(NodeId, NodeId)>,
    pub limits: Option<RadioLimits>,
}

#[derive(Debug, Clone)]
pub enum ProblemCosts {
    /// `[link][channel]`
    Fixed(Vec<Vec<f64>>),
    Coupled(Box<CoupledCosts>),
}

#[derive(Debug, Clone)]
pub struct AllocationProblem {
    pub links: Vec<LinkId>,
    /// each path as indices into `links`
    pub paths: Vec<Vec<usize>>,
    pub channels: Vec<ChannelId>,
    pub costs: ProblemCosts,
}

/// A discrete solution: channel index per problem link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub choice: Vec<usize>,
    pub objective: Airtime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionalAllocation {
    /// `[link][channel]`, each row sums to 1
    pub weights: Vec<Vec<f64>>,
    pub objective: Airtime,
}

impl AllocationProblem {
    pub fn fixed(paths: Vec<Vec<usize>>, table: Vec<Vec<f64>>, channels: Vec<ChannelId>) -> Result<Self> {
        let links = (0..table.len()).map(|i| LinkId(i as u32)).collect();
        let p = Self { links, paths, channels, costs: ProblemCosts::Fixed(table) };
        p.check()?;
        Ok(p)
    }

    /// Backhaul paths of a scenario under the coupled cost model.
    pub fn coupled(
        t: &MeshTopology,
        model: CostModel,
        paths: &[Vec<LinkId>],
        channels: Vec<ChannelId>,
        limits: Option<RadioLimits>,
    ) -> Result<Self> {
        let links: Vec<LinkId> = paths.iter().flatten().copied().collect::<BTreeSet<_>>().into_iter().collect();
        let index: BTreeMap<LinkId, usize> = links.iter().enumerate().map(|(i, &l)| (l, i)).collect();
        let paths = paths.iter().map(|p| p.iter().map(|l| index[l]).collect()).collect();
        let endpoints = links.iter().map(|&l| (t.link(l).tx, t.link(l).rx)).collect();
        let p = Self {
            links,
            paths,
            channels,
            costs: ProblemCosts::Coupled(Box::new(CoupledCosts { model, endpoints, limits })),
        };
        p.check()?;
        Ok(p)
    }

    fn check(&self) -> Result<()> {
        if self.channels.is_empty() {
            return Err(Error::Config("allocation problem needs at least one channel".into()));
        }
        let mut covered = vec![false; self.links.len()];
        for p in &self.paths {
            for &i in p {
                *covered.get_mut(i).ok_or_else(|| Error::Config(format!("path index {i} out of range")))? = true;
            }
        }
        if covered.iter().any(|c| !c) {
            return Err(Error::Config("every link must belong to a path".into()));
        }
        if let ProblemCosts::Fixed(table) = &self.costs {
            if table.iter().any(|row| row.len() != self.channels.len()) {
                return Err(Error::Config("cost table width must equal the channel count".into()));
            }
        }
        Ok(())
    }

    /// Per-link costs of a complete discrete assignment.
    pub fn link_costs(&self, choice: &[usize]) -> Vec<Airtime> {
        assert_eq!(choice.len(), self.links.len());
        match &self.costs {
            ProblemCosts::Fixed(table) => choice.iter().enumerate().map(|(i, &c)| table[i][c]).collect(),
            ProblemCosts::Coupled(cc) => {
                let mut out = vec![0.0; choice.len()];
                for (ci, &f) in self.channels.iter().enumerate() {
                    let members: Vec<usize> = (0..choice.len()).filter(|&i| choice[i] == ci).collect();
                    let group: Vec<LinkId> = members.iter().map(|&i| self.links[i]).collect();
                    for (&i, c) in members.iter().zip(cc.model.group_costs(f, &group)) {
                        out[i] = c;
                    }
                }
                out
            }
        }
    }

    fn path_max(&self, costs: &[Airtime]) -> Airtime {
        self.paths.iter().map(|p| p.iter().map(|&i| costs[i]).sum::<f64>()).fold(0.0, f64::max)
    }

    /// Max over paths of summed link costs; infinite if radio limits are violated.
    pub fn objective(&self, choice: &[usize]) -> Airtime {
        if !self.radio_feasible(choice) {
            return f64::INFINITY;
        }
        self.path_max(&self.link_costs(choice))
    }

    pub fn fractional_objective(&self, a: &FractionalAllocation) -> Result<Airtime> {
        let ProblemCosts::Fixed(table) = &self.costs else {
            return Err(Error::Unsupported("fractional assignments have no coupled cost".into()));
        };
        let costs: Vec<f64> = a
            .weights
            .iter()
            .zip(table)
            .map(|(w, row)| w.iter().zip(row).filter(|(x, _)| **x > 0.0).map(|(x, c)| x * c).sum())
            .collect();
        Ok(self.path_max(&costs))
    }

    fn radio_feasible(&self, choice: &[usize]) -> bool {
        let ProblemCosts::Coupled(cc) = &self.costs else { return true };
        let Some(lim) = cc.limits else { return true };
        let mut out: BTreeMap<NodeId, BTreeSet<usize>> = BTreeMap::new();
        let mut inn: BTreeMap<NodeId, BTreeSet<usize>> = BTreeMap::new();
        for (i, &c) in choice.iter().enumerate() {
            let (tx, rx) = cc.endpoints[i];
            out.entry(tx).or_default().insert(c);
            inn.entry(rx).or_default().insert(c);
        }
        out.values().all(|s| s.len() <= lim.n_out) && inn.values().all(|s| s.len() <= lim.n_in)
    }

    /// Writes a discrete solution into a scenario assignment.
    pub fn apply(&self, choice: &[usize], asg: &mut ChannelAssignment) {
        for (i, &c) in choice.iter().enumerate() {
            asg.set(self.links[i], self.channels[c]);
        }
    }

    /// Channel indices of the problem links under an existing assignment.
    pub fn choice_of(&self, asg: &ChannelAssignment) -> Option<Vec<usize>> {
        self.links
            .iter()
            .map(|&l| asg.channel(l).and_then(|f| self.channels.iter().position(|&c| c == f)))
            .collect()
    }

    fn space_size(&self) -> f64 {
        (self.channels.len() as f64).powi(self.links.len() as i32)
    }
}

/// Plain enumeration in lexicographic order; first strictly better value wins.
pub fn solve_exhaustive(p: &AllocationProblem, cfg: &SolverConfig) -> Result<Allocation> {
    if p.space_size() > cfg.enumeration_limit {
        return Err(Error::TooLarge(format!(
            "{}^{} assignments exceed the enumeration limit {}",
            p.channels.len(),
            p.links.len(),
            cfg.enumeration_limit
        )));
    }
    let k = p.channels.len();
    let mut choice = vec![0usize; p.links.len()];
    let mut best: Option<Allocation> = None;
    loop {
        let v = p.objective(&choice);
        if v.is_finite() && best.as_ref().map_or(true, |b| v < b.objective - TIE_TOLERANCE) {
            best = Some(Allocation { choice: choice.clone(), objective: v });
        }
        // odometer increment, last link fastest
        let mut i = choice.len();
        loop {
            if i == 0 {
                return best.ok_or(Error::Infeasible);
            }
            i -= 1;
            choice[i] += 1;
            if choice[i] < k {
                break;
            }
            choice[i] = 0;
        }
    }
}

/// Exact optimum; branch and bound when enabled, else plain enumeration.
pub fn solve_exact(p: &AllocationProblem, cfg: &SolverConfig) -> Result<Allocation> {
    if cfg.branch_and_bound {
        solve_branch_and_bound(p, cfg, None)
    } else {
        solve_exhaustive(p, cfg)
    }
}

struct Search<'a> {
    p: &'a AllocationProblem,
    cfg: &'a SolverConfig,
    /// admissible per-link lower bound
    floor: Vec<f64>,
    choice: Vec<usize>,
    cost: Vec<f64>,
    members: Vec<Vec<usize>>,
    out_ch: BTreeMap<NodeId, Vec<usize>>,
    in_ch: BTreeMap<NodeId, Vec<usize>>,
    global_lb: f64,
    seed: f64,
    best: Option<Allocation>,
    nodes: u64,
    done: bool,
}

impl<'a> Search<'a> {
    fn new(p: &'a AllocationProblem, cfg: &'a SolverConfig, seed: f64) -> Self {
        let m = p.links.len();
        let floor: Vec<f64> = match &p.costs {
            ProblemCosts::Fixed(t) => t.iter().map(|r| r.iter().copied().fold(f64::INFINITY, f64::min)).collect(),
            ProblemCosts::Coupled(cc) => p
                .links
                .iter()
                .map(|&l| p.channels.iter().map(|&f| cc.model.base_cost(l, f, &[l])).fold(f64::INFINITY, f64::min))
                .collect(),
        };
        let global_lb = p.path_max(&floor);
        Self {
            p,
            cfg,
            floor: floor.clone(),
            choice: vec![usize::MAX; m],
            cost: floor,
            members: vec![Vec::new(); p.channels.len()],
            out_ch: BTreeMap::new(),
            in_ch: BTreeMap::new(),
            global_lb,
            seed,
            best: None,
            nodes: 0,
            done: false,
        }
    }

    fn set_cost(&mut self, i: usize, c: f64) {
        self.cost[i] = c;
    }

    /// Unassigned links sit at their floor, so at a leaf this is the
    /// objective, computed exactly as `AllocationProblem::objective` does.
    fn bound(&self) -> f64 {
        self.p.path_max(&self.cost)
    }

    /// Recomputes the partial costs of channel `ci`'s members.
    fn refresh_group(&mut self, ci: usize) {
        let ProblemCosts::Coupled(cc) = &self.p.costs else { unreachable!() };
        let group: Vec<LinkId> = self.members[ci].iter().map(|&i| self.p.links[i]).collect();
        let costs = cc.model.group_costs(self.p.channels[ci], &group);
        let members = self.members[ci].clone();
        for (i, c) in members.into_iter().zip(costs) {
            self.set_cost(i, c);
        }
    }

    fn radio_ok(&self, i: usize, ci: usize) -> bool {
        let ProblemCosts::Coupled(cc) = &self.p.costs else { return true };
        let Some(lim) = cc.limits else { return true };
        let (tx, rx) = cc.endpoints[i];
        let fits = |m: &BTreeMap<NodeId, Vec<usize>>, n: NodeId, cap: usize| {
            m.get(&n).map_or(true, |v| v.contains(&ci) || v.len() < cap)
        };
        fits(&self.out_ch, tx, lim.n_out) && fits(&self.in_ch, rx, lim.n_in)
    }

    fn push(&mut self, i: usize, ci: usize) {
        self.choice[i] = ci;
        match &self.p.costs {
            ProblemCosts::Fixed(t) => {
                let c = t[i][ci];
                self.set_cost(i, c);
            }
            ProblemCosts::Coupled(cc) => {
                let (tx, rx) = cc.endpoints[i];
                let o = self.out_ch.entry(tx).or_default();
                if !o.contains(&ci) {
                    o.push(ci);
                }
                let n = self.in_ch.entry(rx).or_default();
                if !n.contains(&ci) {
                    n.push(ci);
                }
                self.members[ci].push(i);
                self.refresh_group(ci);
            }
        }
    }

    fn pop(&mut self, i: usize, ci: usize) {
        self.choice[i] = usize::MAX;
        if let ProblemCosts::Coupled(cc) = &self.p.costs {
            let (tx, rx) = cc.endpoints[i];
            self.members[ci].pop();
            let still = |side: &dyn Fn(usize) -> NodeId, node: NodeId, members: &[Vec<usize>]| {
                members[ci].iter().any(|&j| side(j) == node)
            };
            let endpoints = &cc.endpoints;
            if !still(&|j| endpoints[j].0, tx, &self.members) {
                self.out_ch.get_mut(&tx).unwrap().retain(|&c| c != ci);
            }
            if !still(&|j| endpoints[j].1, rx, &self.members) {
                self.in_ch.get_mut(&rx).unwrap().retain(|&c| c != ci);
            }
            self.refresh_group(ci);
        }
        let f = self.floor[i];
        self.set_cost(i, f);
    }

    fn dfs(&mut self, i: usize) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.cfg.node_limit {
            return Err(Error::TooLarge(format!(
                "branch and bound exceeded {} nodes on {} links x {} channels",
                self.cfg.node_limit,
                self.p.links.len(),
                self.p.channels.len()
            )));
        }
        let b = self.bound();
        let prune = match &self.best {
            Some(best) => b >= best.objective - TIE_TOLERANCE,
            None => b > self.seed + TIE_TOLERANCE,
        };
        if prune || !b.is_finite() {
            return Ok(());
        }
        if i == self.p.links.len() {
            self.best = Some(Allocation { choice: self.choice.clone(), objective: b });
            if b <= self.global_lb + TIE_TOLERANCE {
                self.done = true;
            }
            return Ok(());
        }
        // Channels are interchangeable in coupled mode: try every channel
        // already in use plus the first unused one.
        let k = self.p.channels.len();
        let limit = match self.p.costs {
            ProblemCosts::Fixed(_) => k,
            ProblemCosts::Coupled(_) => {
                let used = self.choice[..i].iter().copied().max().map_or(0, |m| m + 1);
                (used + 1).min(k)
            }
        };
        for ci in 0..limit {
            if !self.radio_ok(i, ci) {
                continue;
            }
            self.push(i, ci);
            let r = self.dfs(i + 1);
            self.pop(i, ci);
            r?;
            if self.done {
                break;
            }
        }
        Ok(())
    }
}

/// Depth-first branch and bound in lexicographic order. `incumbent` is an
/// optional known-achievable value used only for pruning.
pub fn solve_branch_and_bound(
    p: &AllocationProblem,
    cfg: &SolverConfig,
    incumbent: Option<Airtime>,
) -> Result<Allocation> {
    let mut s = Search::new(p, cfg, incumbent.unwrap_or(f64::INFINITY));
    s.dfs(0)?;
    log::debug!("branch and bound: {} nodes", s.nodes);
    match s.best {
        Some(b) => Ok(b),
        None => Err(Error::Infeasible),
    }
}

/// LP relaxation over fractional channel weights; fixed costs only.
pub fn solve_fractional(p: &AllocationProblem) -> Result<FractionalAllocation> {
    use minilp::{ComparisonOp, OptimizationDirection, Problem};
    let ProblemCosts::Fixed(table) = &p.costs else {
        return Err(Error::Unsupported("the LP relaxation needs fixed costs".into()));
    };
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let z = lp.add_var(1.0, (0.0, f64::INFINITY));
    let vars: Vec<Vec<minilp::Variable>> =
        table.iter().map(|row| row.iter().map(|_| lp.add_var(0.0, (0.0, 1.0))).collect()).collect();
    for row in &vars {
        let expr: Vec<(minilp::Variable, f64)> = row.iter().map(|&v| (v, 1.0)).collect();
        lp.add_constraint(expr.as_slice(), ComparisonOp::Eq, 1.0);
    }
    for path in &p.paths {
        let mut expr: Vec<(minilp::Variable, f64)> = vec![(z, -1.0)];
        for &i in path {
            for (ci, &v) in vars[i].iter().enumerate() {
                expr.push((v, table[i][ci]));
            }
        }
        lp.add_constraint(expr.as_slice(), ComparisonOp::Le, 0.0);
    }
    let sol = lp.solve().map_err(|e| match e {
        minilp::Error::Infeasible => Error::Infeasible,
        minilp::Error::Unbounded => Error::Unsupported("unbounded relaxation".into()),
    })?;
    let weights: Vec<Vec<f64>> = vars.iter().map(|row| row.iter().map(|&v| sol[v].clamp(0.0, 1.0)).collect()).collect();
    Ok(FractionalAllocation { weights, objective: sol[z] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::airtime::AirtimeConfig;
    use crate::topology::TopologyBuilder;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn chans(k: usize) -> Vec<ChannelId> {
        (0..k).map(|i| ChannelId(36 + 4 * i as u16)).collect()
    }

    #[test]
    fn fixed_objective_single_path() {
        let p = AllocationProblem::fixed(vec![vec![0, 1]], vec![vec![2.0, 5.0], vec![3.0, 1.0]], chans(2)).unwrap();
        assert_eq!(p.objective(&[0, 1]), 3.0);
        assert_eq!(p.objective(&[1, 0]), 8.0);
    }

    #[test]
    fn uniform_costs() {
        let p = AllocationProblem::fixed(vec![vec![0, 1, 2]], vec![vec![1.5; 3]; 3], chans(3)).unwrap();
        assert_eq!(p.objective(&[2, 0, 1]), 4.5);
    }

    #[test]
    fn fixed_mode_separable() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let table: Vec<Vec<f64>> = (0..5).map(|_| (0..3).map(|_| rng.gen_range(1.0..9.0)).collect()).collect();
            let paths = vec![vec![0, 1], vec![1, 2, 3], vec![4]];
            let p = AllocationProblem::fixed(paths, table.clone(), chans(3)).unwrap();
            let argmin: Vec<usize> = table
                .iter()
                .map(|r| (0..3).min_by(|&a, &b| r[a].total_cmp(&r[b])).unwrap())
                .collect();
            let best = solve_exact(&p, &SolverConfig::default()).unwrap();
            assert!((best.objective - p.objective(&argmin)).abs() < 1e-12);
        }
    }

    #[test]
    fn fractional_examples() {
        let p = AllocationProblem::fixed(vec![vec![0]], vec![vec![2.0, 5.0]], chans(2)).unwrap();
        let a = solve_fractional(&p).unwrap();
        assert!((a.objective - 2.0).abs() < 1e-9);
        assert!((a.weights[0][0] - 1.0).abs() < 1e-9);
        let tie = AllocationProblem::fixed(vec![vec![0]], vec![vec![3.0, 3.0]], chans(2)).unwrap();
        let a = solve_fractional(&tie).unwrap();
        assert!((a.objective - 3.0).abs() < 1e-9);
        assert!((a.weights[0].iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fractional_matches_discrete_on_fixed_tables() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..30 {
            let n = rng.gen_range(1..6);
            let table: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.gen_range(1.0..9.0)).collect()).collect();
            let paths: Vec<Vec<usize>> = vec![(0..n).collect(), (0..n).step_by(2).collect()];
            let p = AllocationProblem::fixed(paths, table, chans(3)).unwrap();
            let d = solve_exact(&p, &SolverConfig::default()).unwrap();
            let f = solve_fractional(&p).unwrap();
            assert!((d.objective - f.objective).abs() < 1e-7, "{} vs {}", d.objective, f.objective);
            assert!((p.fractional_objective(&f).unwrap() - f.objective).abs() < 1e-7);
        }
    }

    /// Two parallel links 30 m apart: they contend on a shared channel.
    fn collision_pair() -> (MeshTopology, Vec<LinkId>) {
        let t = TopologyBuilder::new((1000.0, 1000.0))
            .ap("a", 100.0, 100.0)
            .ap("b", 300.0, 100.0)
            .ap("c", 100.0, 130.0)
            .ap("d", 300.0, 130.0)
            .build()
            .unwrap();
        let ab = t.backhaul_link(NodeId(0), NodeId(1)).unwrap();
        let cd = t.backhaul_link(NodeId(2), NodeId(3)).unwrap();
        (t, vec![ab, cd])
    }

    #[test]
    fn coupled_pair_prefers_split() {
        let (t, links) = collision_pair();
        let model = CostModel::new(&t, AirtimeConfig::default());
        let p = AllocationProblem::coupled(&t, model, &[links.clone()], chans(2), None).unwrap();
        let same = p.link_costs(&[0, 0]);
        let split = p.link_costs(&[0, 1]);
        assert!((same[0] - 2.0 * split[0]).abs() < 1e-12);
        assert!((p.objective(&[0, 0]) - 2.0 * p.objective(&[0, 1])).abs() < 1e-12);
        let cfg = SolverConfig::default();
        let ex = solve_exhaustive(&p, &cfg).unwrap();
        assert_eq!(ex.choice, vec![0, 1]);
        assert_eq!(solve_branch_and_bound(&p, &cfg, None).unwrap(), ex);
    }

    #[test]
    fn fractional_rejected_in_coupled_mode() {
        let (t, links) = collision_pair();
        let model = CostModel::new(&t, AirtimeConfig::default());
        let p = AllocationProblem::coupled(&t, model, &[links], chans(2), None).unwrap();
        assert!(matches!(solve_fractional(&p), Err(Error::Unsupported(_))));
        let a = FractionalAllocation { weights: vec![vec![0.5, 0.5]; 2], objective: 0.0 };
        assert!(p.fractional_objective(&a).is_err());
    }

    #[test]
    fn relabeling_invariance() {
        let (t, links) = collision_pair();
        let model = CostModel::new(&t, AirtimeConfig::default());
        let p = AllocationProblem::coupled(&t, model, &[links], chans(3), None).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let perm = |x: usize| (x + 1) % 3;
                assert_eq!(p.objective(&[a, b]), p.objective(&[perm(a), perm(b)]));
            }
        }
    }

    #[test]
    fn enumeration_limit_is_explicit() {
        let p = AllocationProblem::fixed(vec![(0..30).collect()], vec![vec![1.0; 3]; 30], chans(3)).unwrap();
        let cfg = SolverConfig { branch_and_bound: false, ..Default::default() };
        assert!(matches!(solve_exact(&p, &cfg), Err(Error::TooLarge(_))));
    }

    #[test]
    fn node_limit_is_explicit() {
        let (t, links) = collision_pair();
        let model = CostModel::new(&t, AirtimeConfig::default());
        let p = AllocationProblem::coupled(&t, model, &[links], chans(2), None).unwrap();
        let cfg = SolverConfig { node_limit: 2, ..Default::default() };
        assert!(matches!(solve_exact(&p, &cfg), Err(Error::TooLarge(_))));
    }

    #[test]
    fn radio_limits_respected() {
        // a→b and a→c from one OUT radio must share a channel
        let t = TopologyBuilder::new((1000.0, 1000.0))
            .ap("a", 100.0, 100.0)
            .ap("b", 300.0, 100.0)
            .ap("c", 100.0, 300.0)
            .build()
            .unwrap();
        let ab = t.backhaul_link(NodeId(0), NodeId(1)).unwrap();
        let ac = t.backhaul_link(NodeId(0), NodeId(2)).unwrap();
        let model = CostModel::new(&t, AirtimeConfig::default());
        let lim = RadioLimits { n_in: 1, n_out: 1 };
        let p = AllocationProblem::coupled(&t, model, &[vec![ab], vec![ac]], chans(2), Some(lim)).unwrap();
        assert!(p.objective(&[0, 1]).is_infinite());
        let best = solve_exact(&p, &SolverConfig::default()).unwrap();
        assert_eq!(best.choice[0], best.choice[1]);
        assert_eq!(best, solve_exhaustive(&p, &SolverConfig::default()).unwrap());
    }
}
