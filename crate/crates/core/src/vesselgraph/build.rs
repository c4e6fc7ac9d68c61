use std::collections::VecDeque;

use super::skeleton::RING;
use super::{
    point_caliber, trim_calibers, Component, Edge, GraphConfig, Node, NodeKind, Skeleton,
    VesselGraph, GRAPH_SCHEMA,
};

type Px = (usize, usize);

struct WorkNode {
    pos: Px,
    alive: bool,
}

struct WorkEdge {
    a: usize,
    b: usize,
    pts: Vec<Px>,
    alive: bool,
}

struct Work<'a> {
    skel: &'a Skeleton,
    config: &'a GraphConfig,
    nodes: Vec<WorkNode>,
    edges: Vec<WorkEdge>,
}

impl Work<'_> {
    fn mean_caliber(&self, e: usize) -> f64 {
        let all: Vec<f64> = self.edges[e]
            .pts
            .iter()
            .map(|&(x, y)| point_caliber(self.skel.dt_at(x, y), self.config))
            .collect();
        let kept = trim_calibers(&all, self.config.caliber_trim);
        kept.iter().sum::<f64>() / kept.len().max(1) as f64
    }

    fn length(&self, e: usize) -> f64 {
        self.edges[e]
            .pts
            .windows(2)
            .map(|p| (p[1].0 as f64 - p[0].0 as f64).hypot(p[1].1 as f64 - p[0].1 as f64))
            .sum()
    }

    fn incident(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.nodes.len()];
        for (i, e) in self.edges.iter().enumerate() {
            if e.alive {
                inc[e.a].push(i);
                if e.b != e.a {
                    inc[e.b].push(i);
                }
            }
        }
        inc
    }

    fn push_edge(&mut self, a: usize, b: usize, mut pts: Vec<Px>) {
        pts.dedup();
        self.edges.push(WorkEdge {
            a,
            b,
            pts,
            alive: true,
        });
    }

    /// Merge every node joining exactly two edges into a single edge.
    fn merge_pass_through(&mut self) {
        loop {
            let inc = self.incident();
            let Some(n) = (0..self.nodes.len())
                .find(|&n| self.nodes[n].alive && inc[n].len() == 2 && inc[n][0] != inc[n][1])
            else {
                return;
            };
            let (e1, e2) = (inc[n][0], inc[n][1]);
            let mut first = self.edges[e1].pts.clone();
            let mut start = self.edges[e1].a;
            if self.edges[e1].a == n {
                first.reverse();
                start = self.edges[e1].b;
            }
            let mut second = self.edges[e2].pts.clone();
            let mut end = self.edges[e2].b;
            if self.edges[e2].b == n {
                second.reverse();
                end = self.edges[e2].a;
            }
            first.extend_from_slice(&second[1..]);
            first.dedup();
            self.edges[e1] = WorkEdge {
                a: start,
                b: end,
                pts: first,
                alive: true,
            };
            self.edges[e2].alive = false;
            self.nodes[n].alive = false;
        }
    }
}

fn neighbours(skel: &Skeleton, (x, y): Px) -> impl Iterator<Item = Px> + '_ {
    RING.iter().filter_map(move |&(dx, dy)| {
        let (nx, ny) = (x as isize + dx, y as isize + dy);
        skel.bits
            .get_signed(nx, ny)
            .then_some((nx as usize, ny as usize))
    })
}

/// Build the acyclic vessel graph of a skeleton.
///
/// Junction pixel clusters collapse into one node each; segments are traced
/// along degree-2 pixels. Cycles are broken by keeping a maximum spanning
/// forest under mean segment caliber, pass-through nodes are merged, and
/// short thinning spurs are pruned. Each component is rooted at the free end
/// of its thickest terminal segment.
pub fn build_graph(skel: &Skeleton, config: &GraphConfig) -> VesselGraph {
    let (w, h) = (skel.width(), skel.height());
    let idx = |(x, y): Px| y * w + x;
    let mut degree = vec![0usize; w * h];
    let pixels: Vec<Px> = skel.bits.ones().collect();
    for &p in &pixels {
        degree[idx(p)] = neighbours(skel, p).count();
    }

    let mut work = Work {
        skel,
        config,
        nodes: Vec::new(),
        edges: Vec::new(),
    };
    let mut node_of = vec![usize::MAX; w * h];
    let mut members: Vec<Vec<Px>> = Vec::new();

    for &p in &pixels {
        if node_of[idx(p)] != usize::MAX || degree[idx(p)] == 2 {
            continue;
        }
        let id = work.nodes.len();
        let mut cluster = vec![p];
        node_of[idx(p)] = id;
        if degree[idx(p)] >= 3 {
            let mut queue = VecDeque::from([p]);
            while let Some(q) = queue.pop_front() {
                for n in neighbours(skel, q) {
                    if degree[idx(n)] >= 3 && node_of[idx(n)] == usize::MAX {
                        node_of[idx(n)] = id;
                        cluster.push(n);
                        queue.push_back(n);
                    }
                }
            }
        }
        cluster.sort_by_key(|&(x, y)| (y, x));
        let cx = cluster.iter().map(|p| p.0 as f64).sum::<f64>() / cluster.len() as f64;
        let cy = cluster.iter().map(|p| p.1 as f64).sum::<f64>() / cluster.len() as f64;
        let rep = *cluster
            .iter()
            .min_by(|a, b| {
                let da = (a.0 as f64 - cx).powi(2) + (a.1 as f64 - cy).powi(2);
                let db = (b.0 as f64 - cx).powi(2) + (b.1 as f64 - cy).powi(2);
                da.total_cmp(&db)
            })
            .expect("cluster is non-empty");
        work.nodes.push(WorkNode {
            pos: rep,
            alive: true,
        });
        members.push(cluster);
    }

    let mut visited = vec![false; w * h];
    let mut direct_links: Vec<(usize, usize)> = Vec::new();
    for id in 0..work.nodes.len() {
        let rep_a = work.nodes[id].pos;
        for &q in &members[id].clone() {
            for n in neighbours(skel, q).collect::<Vec<_>>() {
                let m = node_of[idx(n)];
                if m == id {
                    continue;
                }
                if m != usize::MAX {
                    let key = (idx(q).min(idx(n)), idx(q).max(idx(n)));
                    if !direct_links.contains(&key) {
                        direct_links.push(key);
                        let rep_b = work.nodes[m].pos;
                        work.push_edge(id, m, vec![rep_a, q, n, rep_b]);
                    }
                    continue;
                }
                if visited[idx(n)] {
                    continue;
                }
                let mut pts = vec![rep_a, q];
                let (mut prev, mut cur) = (q, n);
                loop {
                    visited[idx(cur)] = true;
                    pts.push(cur);
                    let Some(next) = neighbours(skel, cur).find(|&c| c != prev) else {
                        break;
                    };
                    let m = node_of[idx(next)];
                    if m != usize::MAX {
                        pts.push(next);
                        pts.push(work.nodes[m].pos);
                        work.push_edge(id, m, pts);
                        break;
                    }
                    if visited[idx(next)] {
                        break;
                    }
                    prev = cur;
                    cur = next;
                }
            }
        }
    }

    // Closed loops without any branch point get a synthetic node.
    for &p in &pixels {
        if visited[idx(p)] || node_of[idx(p)] != usize::MAX {
            continue;
        }
        let id = work.nodes.len();
        node_of[idx(p)] = id;
        visited[idx(p)] = true;
        work.nodes.push(WorkNode {
            pos: p,
            alive: true,
        });
        let mut pts = vec![p];
        let (mut prev, mut cur) = (p, neighbours(skel, p).next().expect("loop pixel"));
        while cur != p {
            visited[idx(cur)] = true;
            pts.push(cur);
            let Some(next) = neighbours(skel, cur).find(|&c| c != prev) else {
                break;
            };
            prev = cur;
            cur = next;
        }
        pts.push(p);
        work.push_edge(id, id, pts);
    }

    // Maximum spanning forest by mean caliber; self-loops never survive.
    let means: Vec<f64> = (0..work.edges.len())
        .map(|e| work.mean_caliber(e))
        .collect();
    let mut order: Vec<usize> = (0..work.edges.len()).collect();
    order.sort_by(|&i, &j| means[j].total_cmp(&means[i]).then(i.cmp(&j)));
    let mut parent: Vec<usize> = (0..work.nodes.len()).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for e in order {
        let (ra, rb) = (
            find(&mut parent, work.edges[e].a),
            find(&mut parent, work.edges[e].b),
        );
        if ra == rb {
            work.edges[e].alive = false;
        } else {
            parent[ra] = rb;
        }
    }
    work.merge_pass_through();

    // Spurs: short terminal segments hanging off a branch point.
    let inc = work.incident();
    let mut pruned = false;
    for e in 0..work.edges.len() {
        if !work.edges[e].alive {
            continue;
        }
        let (a, b) = (work.edges[e].a, work.edges[e].b);
        let junction = match (inc[a].len(), inc[b].len()) {
            (1, d) if d >= 3 => b,
            (d, 1) if d >= 3 => a,
            _ => continue,
        };
        let parent_caliber = inc[junction]
            .iter()
            .filter(|&&o| o != e)
            .map(|&o| work.mean_caliber(o))
            .fold(0.0, f64::max);
        let len = work.length(e);
        if len < config.spur_max_length && len < parent_caliber {
            work.edges[e].alive = false;
            let leaf = if junction == a { b } else { a };
            work.nodes[leaf].alive = false;
            pruned = true;
        }
    }
    if pruned {
        work.merge_pass_through();
    }

    assemble(&work)
}

/// Root each component, orient and label edges, and renumber compactly.
fn assemble(work: &Work) -> VesselGraph {
    let inc = work.incident();
    let n_nodes = work.nodes.len();
    let mut comp_of = vec![usize::MAX; n_nodes];
    let mut new_node_id = vec![usize::MAX; n_nodes];
    let mut nodes = Vec::new();
    let mut edges: Vec<Edge> = Vec::new();
    let mut components = Vec::new();

    for start in 0..n_nodes {
        if !work.nodes[start].alive || comp_of[start] != usize::MAX {
            continue;
        }
        let cid = components.len();
        let mut members = vec![start];
        comp_of[start] = cid;
        let mut i = 0;
        while i < members.len() {
            let n = members[i];
            for &e in &inc[n] {
                let o = if work.edges[e].a == n {
                    work.edges[e].b
                } else {
                    work.edges[e].a
                };
                if comp_of[o] == usize::MAX {
                    comp_of[o] = cid;
                    members.push(o);
                }
            }
            i += 1;
        }

        let root = choose_root(work, &inc, &members);

        // Breadth-first orientation from the root.
        let mut order_nodes = vec![root];
        let mut seen_edge = vec![false; work.edges.len()];
        let mut oriented: Vec<(usize, usize, usize, usize)> = Vec::new(); // (edge, from, to, parent slot)
        let mut level_at = vec![0u32; n_nodes];
        let mut slot_of_node = vec![usize::MAX; n_nodes];
        let mut k = 0;
        while k < order_nodes.len() {
            let n = order_nodes[k];
            let mut leaving: Vec<usize> =
                inc[n].iter().copied().filter(|&e| !seen_edge[e]).collect();
            leaving.sort_unstable();
            for e in leaving {
                seen_edge[e] = true;
                let to = if work.edges[e].a == n {
                    work.edges[e].b
                } else {
                    work.edges[e].a
                };
                let lvl = if slot_of_node[n] == usize::MAX {
                    0
                } else {
                    level_at[n] + 1
                };
                let slot = oriented.len();
                oriented.push((e, n, to, slot_of_node[n]));
                level_at[to] = lvl;
                slot_of_node[to] = slot;
                order_nodes.push(to);
            }
            k += 1;
        }

        // Strahler by reverse breadth-first order.
        let mut strahler = vec![1u32; oriented.len()];
        let mut child_orders: Vec<Vec<u32>> = vec![Vec::new(); oriented.len()];
        for s in (0..oriented.len()).rev() {
            let kids = &child_orders[s];
            if let Some(&max) = kids.iter().max() {
                let at_max = kids.iter().filter(|&&o| o == max).count();
                strahler[s] = if at_max >= 2 { max + 1 } else { max };
            }
            let parent_slot = oriented[s].3;
            if parent_slot != usize::MAX {
                let v = strahler[s];
                child_orders[parent_slot].push(v);
            }
        }

        for &n in &order_nodes {
            new_node_id[n] = nodes.len();
            let degree = inc[n].len();
            nodes.push(Node {
                id: nodes.len(),
                x: work.nodes[n].pos.0,
                y: work.nodes[n].pos.1,
                degree,
                kind: match degree {
                    0 => NodeKind::Isolated,
                    1 | 2 => NodeKind::Endpoint,
                    _ => NodeKind::Junction,
                },
                component: cid,
            });
        }
        let mut comp_edges = Vec::new();
        for (s, &(e, from, to, _)) in oriented.iter().enumerate() {
            let mut pts = work.edges[e].pts.clone();
            if work.edges[e].a != from {
                pts.reverse();
            }
            let polyline: Vec<[usize; 2]> = pts.iter().map(|&(x, y)| [x, y]).collect();
            let calibers = pts
                .iter()
                .map(|&(x, y)| point_caliber(work.skel.dt_at(x, y), work.config))
                .collect();
            let id = edges.len();
            comp_edges.push(id);
            edges.push(Edge {
                id,
                node_a: new_node_id[from],
                node_b: new_node_id[to],
                polyline,
                calibers,
                strahler: strahler[s],
                level: level_at[to],
                component: cid,
            });
        }
        components.push(Component {
            id: cid,
            root: new_node_id[root],
            edges: comp_edges,
        });
    }

    VesselGraph {
        schema: GRAPH_SCHEMA.to_string(),
        width: work.skel.width(),
        height: work.skel.height(),
        nodes,
        edges,
        components,
        config: work.config.clone(),
    }
}

/// The free end of the thickest terminal segment; ties go to the lower
/// segment index, and for a lone segment to the thicker end.
fn choose_root(work: &Work, inc: &[Vec<usize>], members: &[usize]) -> usize {
    let mut best: Option<(f64, usize, usize)> = None;
    for &n in members {
        if inc[n].len() != 1 {
            continue;
        }
        let e = inc[n][0];
        let c = work.mean_caliber(e);
        let better = match best {
            None => true,
            Some((bc, be, bn)) => {
                c > bc
                    || (c == bc && e < be)
                    || (c == bc && e == be && end_caliber(work, e, n) > end_caliber(work, e, bn))
            }
        };
        if better {
            best = Some((c, e, n));
        }
    }
    best.map(|b| b.2).unwrap_or(members[0])
}

fn end_caliber(work: &Work, e: usize, node: usize) -> f64 {
    let edge = &work.edges[e];
    let take = edge.pts.len().min(5);
    let slice: Vec<Px> = if edge.a == node {
        edge.pts[..take].to_vec()
    } else {
        edge.pts[edge.pts.len() - take..].to_vec()
    };
    slice
        .iter()
        .map(|&(x, y)| work.skel.dt_at(x, y))
        .sum::<f64>()
        / take.max(1) as f64
}
