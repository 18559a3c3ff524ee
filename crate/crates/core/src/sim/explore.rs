use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::env::{observe_state_change, OutcomeKind, SimEnvironment};
use super::SimError;
use crate::affordance::primitives_from_descriptor;
use crate::affordance::GripperOffsets;
use crate::graph::{SceneGraph, StateChange, Vertex, VertexClass, VertexState};

/// Order in which switch vertices are visited.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisitOrder {
    /// Natural id order (`switch_2` before `switch_10`).
    #[default]
    IdOrder,
    ReverseIdOrder,
    /// Explicit list; unknown ids are an error, missing ones are skipped.
    Custom(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplorationPolicy {
    pub order: VisitOrder,
    /// Number of times every primitive is operated.
    pub passes: usize,
    /// Decide each (switch, lamp) relation by majority over passes instead
    /// of accepting every observed change.
    pub majority_vote: bool,
}

impl Default for ExplorationPolicy {
    fn default() -> Self {
        Self { order: VisitOrder::IdOrder, passes: 1, majority_vote: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub lamp: String,
    pub change: StateChange,
}

/// One operated primitive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplorationLogEntry {
    pub pass: usize,
    pub switch_id: String,
    pub primitive: usize,
    /// Physical switch the primitive landed on, if any is near.
    pub target: Option<usize>,
    pub result: OutcomeKind,
    pub observations: Vec<Observation>,
}

fn natural_key(id: &str) -> (String, u64, String) {
    let digits = id.len() - id.trim_end_matches(|c: char| c.is_ascii_digit()).len();
    let (prefix, num) = id.split_at(id.len() - digits);
    (prefix.to_string(), num.parse().unwrap_or(0), id.to_string())
}

fn visit_list(graph: &SceneGraph, order: &VisitOrder) -> Result<Vec<String>, SimError> {
    let mut ids: Vec<String> = graph.vertices_of(VertexClass::Switch).map(|v| v.id.clone()).collect();
    ids.sort_by_key(|id| natural_key(id));
    match order {
        VisitOrder::IdOrder => Ok(ids),
        VisitOrder::ReverseIdOrder => {
            ids.reverse();
            Ok(ids)
        }
        VisitOrder::Custom(list) => {
            for id in list {
                if !ids.contains(id) {
                    return Err(SimError::Graph(crate::graph::GraphError::NotASwitch(id.clone())));
                }
            }
            Ok(list.clone())
        }
    }
}

/// Operate every primitive of every switch vertex, compare lamp states
/// before and after, and learn `controls` edges from the reported changes.
pub fn run_exploration(
    mut graph: SceneGraph,
    env: &mut SimEnvironment,
    policy: &ExplorationPolicy,
    tolerance: f64,
) -> Result<(SceneGraph, Vec<ExplorationLogEntry>), SimError> {
    let passes = policy.passes.max(1);
    let switches = visit_list(&graph, &policy.order)?;
    let lamps: Vec<String> = graph.vertices_of(VertexClass::Lamp).map(|v| v.id.clone()).collect();
    for l in &lamps {
        env.lamp_on(l)?;
    }
    let flip = env.noise().state_flip_rate;
    let mut rng = env.state_rng();
    let mut log = Vec::new();
    // (switch, primitive, lamp) → passes with a reported change.
    let mut votes: BTreeMap<(String, usize, String), usize> = BTreeMap::new();

    for pass in 0..passes {
        for sid in &switches {
            let prims = graph.vertex(sid).map(|v| v.primitives.clone()).unwrap_or_default();
            for (k, prim) in prims.iter().enumerate() {
                let before = env.snapshot();
                let target = env.nearest_switch(prim.origin());
                let result = match target {
                    Some(t) => env.operate_switch(t, prim, tolerance)?.result,
                    None => OutcomeKind::RefinementFailure,
                };
                let after = env.snapshot();
                let mut observations = Vec::with_capacity(lamps.len());
                for l in &lamps {
                    let change = observe_state_change(l, &before, &after, flip, &mut rng)?;
                    observations.push(Observation { lamp: l.clone(), change });
                }
                if policy.majority_vote {
                    for o in &observations {
                        if o.change != StateChange::NoChange {
                            *votes.entry((sid.clone(), k, o.lamp.clone())).or_default() += 1;
                        }
                    }
                } else {
                    let obs: Vec<(String, StateChange)> =
                        observations.iter().map(|o| (o.lamp.clone(), o.change)).collect();
                    graph.apply_interaction_result(sid, &obs)?;
                }
                log.push(ExplorationLogEntry {
                    pass,
                    switch_id: sid.clone(),
                    primitive: k,
                    target,
                    result,
                    observations,
                });
            }
        }
    }

    if policy.majority_vote {
        let needed = passes / 2 + 1;
        let accepted: Vec<(String, usize, String)> =
            votes.into_iter().filter(|(_, n)| *n >= needed).map(|(key, _)| key).collect();
        // Each accepted (switch, primitive) toggles its lamp once per pass,
        // so the believed final state follows from the parity of toggles.
        let mut toggles: BTreeMap<&str, usize> = BTreeMap::new();
        for (_, _, lamp) in &accepted {
            *toggles.entry(lamp.as_str()).or_default() += passes;
        }
        let mut finals: BTreeMap<String, StateChange> = BTreeMap::new();
        for (lamp, n) in toggles {
            let was_on = graph.vertex(lamp).map(|v| v.state == VertexState::On).unwrap_or(false);
            let on = was_on ^ (n % 2 == 1);
            finals.insert(lamp.to_string(), if on { StateChange::OffToOn } else { StateChange::OnToOff });
        }
        for (sid, _, lamp) in &accepted {
            graph.apply_interaction_result(sid, &[(lamp.clone(), finals[lamp])])?;
        }
    }
    Ok((graph, log))
}

/// Graph holding the environment's lamps (off) and one switch vertex per
/// physical switch with primitives from its true descriptor. Switch ids are
/// `switch_<index>`.
pub fn ground_truth_graph(env: &SimEnvironment, offsets: &GripperOffsets) -> Result<SceneGraph, SimError> {
    let mut g = SceneGraph::new();
    for l in &env.spec().lamps {
        let pose = crate::geometry::ElementPose::new(l.position, -nalgebra::Vector3::z())
            .map_err(|e| SimError::InvalidSpec { path: "lamps".into(), message: e.to_string() })?;
        g.add_vertex(Vertex::lamp(l.id.clone(), pose, env.lamp_on(&l.id)?))?;
    }
    for (i, s) in env.spec().switches.iter().enumerate() {
        let mut v = Vertex::switch(format!("switch_{i}"), s.pose);
        if let Ok(set) = primitives_from_descriptor(&s.descriptor, &s.pose, offsets) {
            v.primitives = set.into_vec();
        }
        g.add_vertex(v)?;
    }
    Ok(g)
}

/// True `controls` pairs as (switch vertex id, lamp id), using the ids of
/// [`ground_truth_graph`].
pub fn true_edges(env: &SimEnvironment) -> std::collections::BTreeSet<(String, String)> {
    env.spec()
        .wiring
        .iter()
        .flat_map(|w| w.lamps.iter().map(move |l| (format!("switch_{}", w.switch), l.clone())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affordance::{AffordanceDescriptor, SwitchType};
    use crate::geometry::ElementPose;
    use crate::sim::scene::{LampSpec, SimSceneSpec, SwitchSpec, WiringEntry};
    use crate::sim::{build_sim_scene, DEFAULT_TOLERANCE_M};
    use nalgebra::Vector3;

    fn learned(g: &SceneGraph) -> std::collections::BTreeSet<(String, String)> {
        g.edges().iter().map(|e| (e.a.clone(), e.b.clone())).collect()
    }

    fn two_by_two() -> SimSceneSpec {
        let n = Vector3::new(0.0, -1.0, 0.0);
        let sw = |x: f64| {
            SwitchSpec::new(
                ElementPose::new(Vector3::new(x, 2.0, 1.0), n).unwrap(),
                AffordanceDescriptor::single(SwitchType::PushButton),
            )
        };
        SimSceneSpec {
            switches: vec![sw(0.0), sw(0.5)],
            lamps: vec![
                LampSpec { id: "l1".into(), position: Vector3::new(0.0, 0.0, 2.5) },
                LampSpec { id: "l2".into(), position: Vector3::new(1.0, 0.0, 2.5) },
            ],
            wiring: vec![
                WiringEntry { switch: 0, button: 0, lamps: ["l1".to_string(), "l2".to_string()].into() },
                WiringEntry { switch: 1, button: 0, lamps: ["l1".to_string()].into() },
            ],
            noise: Default::default(),
            seed: 0,
        }
    }

    #[test]
    fn noiseless_recovers_wiring() {
        let mut env = build_sim_scene(two_by_two()).unwrap();
        let g = ground_truth_graph(&env, &GripperOffsets::default()).unwrap();
        let (g, log) = run_exploration(g, &mut env, &ExplorationPolicy::default(), DEFAULT_TOLERANCE_M).unwrap();
        assert_eq!(learned(&g), true_edges(&env));
        assert_eq!(log.len(), 2);

        let mut env = build_sim_scene(SimSceneSpec::testrig()).unwrap();
        let g = ground_truth_graph(&env, &GripperOffsets::default()).unwrap();
        let (g, _) = run_exploration(g, &mut env, &ExplorationPolicy::default(), DEFAULT_TOLERANCE_M).unwrap();
        assert_eq!(learned(&g), true_edges(&env));
        for v in g.vertices_of(VertexClass::Lamp) {
            assert_eq!(v.state == VertexState::On, env.lamp_on(&v.id).unwrap(), "{}", v.id);
        }
    }

    #[test]
    fn no_switches_no_change() {
        let mut spec = two_by_two();
        spec.wiring.clear();
        let mut env = build_sim_scene(spec).unwrap();
        let mut g = SceneGraph::new();
        g.add_vertex(Vertex::lamp("l1", ElementPose::new(Vector3::zeros(), Vector3::z()).unwrap(), false)).unwrap();
        let (out, log) = run_exploration(g.clone(), &mut env, &ExplorationPolicy::default(), 0.015).unwrap();
        assert_eq!(out, g);
        assert!(log.is_empty());
    }

    #[test]
    fn voting_noiseless_matches_single_pass() {
        let mut env = build_sim_scene(SimSceneSpec::testrig()).unwrap();
        let g = ground_truth_graph(&env, &GripperOffsets::default()).unwrap();
        let policy = ExplorationPolicy { passes: 5, majority_vote: true, ..Default::default() };
        let (g, log) = run_exploration(g, &mut env, &policy, DEFAULT_TOLERANCE_M).unwrap();
        assert_eq!(learned(&g), true_edges(&env));
        assert_eq!(log.len(), 5 * 14);
        for v in g.vertices_of(VertexClass::Lamp) {
            assert_eq!(v.state == VertexState::On, env.lamp_on(&v.id).unwrap(), "{}", v.id);
        }
    }

    #[test]
    fn natural_order() {
        let mut ids = vec!["switch_10".to_string(), "switch_2".to_string(), "switch_1".to_string()];
        ids.sort_by_key(|id| natural_key(id));
        assert_eq!(ids, ["switch_1", "switch_2", "switch_10"]);
    }
}
