//! ForceAtlas2 force-directed layout with Barnes-Hut repulsion.
//!
//! Linear attraction scaled by weight^edge_weight_influence, degree-weighted
//! repulsion approximated through a quadtree at the configured theta, strong
//! gravity, and the adaptive global/local speed rule governed by the jitter
//! tolerance. Deterministic: seeded initial positions, fixed iteration
//! order, no parallelism.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::WGraph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutParams {
    pub edge_weight_influence: f64,
    pub jitter_tolerance: f64,
    pub barnes_hut_theta: f64,
    pub strong_gravity: bool,
    pub gravity: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for LayoutParams {
    fn default() -> Self {
        LayoutParams {
            edge_weight_influence: 1.0,
            jitter_tolerance: 0.1,
            barnes_hut_theta: 1.2,
            strong_gravity: true,
            gravity: 5.0,
            iterations: 300,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayoutResult {
    /// (x, y) per node.
    pub positions: Vec<(f64, f64)>,
    /// Sum of squared displacements per iteration; the tail of this trace
    /// trends downward as the layout settles.
    pub kinetic_energy: Vec<f64>,
}

struct Cell {
    center: (f64, f64),
    half: f64,
    mass: f64,
    center_of_mass: (f64, f64),
    body: Option<usize>,
    children: Option<[usize; 4]>,
}

fn quadrant(cell_center: (f64, f64), p: (f64, f64)) -> usize {
    (usize::from(p.0 >= cell_center.0)) | (usize::from(p.1 >= cell_center.1) << 1)
}

fn child_center(center: (f64, f64), half: f64, q: usize) -> (f64, f64) {
    let dx = if q & 1 == 1 { half / 2.0 } else { -half / 2.0 };
    let dy = if q & 2 == 2 { half / 2.0 } else { -half / 2.0 };
    (center.0 + dx, center.1 + dy)
}

pub fn forceatlas2(g: &WGraph, params: &LayoutParams) -> LayoutResult {
    let n = g.n();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut positions: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            // Rejection-sample the unit disk.
            loop {
                let x = rng.gen::<f64>() * 2.0 - 1.0;
                let y = rng.gen::<f64>() * 2.0 - 1.0;
                if x * x + y * y <= 1.0 {
                    return (x, y);
                }
            }
        })
        .collect();
    let masses: Vec<f64> = (0..n).map(|i| (g.degree(i) + 1) as f64).collect();

    let mut previous_forces = vec![(0.0f64, 0.0f64); n];
    let mut global_speed = 1.0f64;
    let mut kinetic_energy = Vec::with_capacity(params.iterations);

    for _ in 0..params.iterations {
        let mut forces = vec![(0.0f64, 0.0f64); n];

        // Attraction: linear in distance, scaled by w^influence.
        for &(a, b, w) in &g.edges {
            let scale = w.powf(params.edge_weight_influence);
            let dx = positions[b].0 - positions[a].0;
            let dy = positions[b].1 - positions[a].1;
            forces[a].0 += scale * dx;
            forces[a].1 += scale * dy;
            forces[b].0 -= scale * dx;
            forces[b].1 -= scale * dy;
        }

        // Repulsion via Barnes-Hut: F = m_i * m_j / d along the separation.
        let tree = build_tree(&positions, &masses);
        for i in 0..n {
            let (fx, fy) = repulsion_on(&tree, &positions, &masses, i, params.barnes_hut_theta);
            forces[i].0 += fx;
            forces[i].1 += fy;
        }

        // Gravity toward the origin.
        for i in 0..n {
            let (x, y) = positions[i];
            if params.strong_gravity {
                forces[i].0 -= params.gravity * masses[i] * x;
                forces[i].1 -= params.gravity * masses[i] * y;
            } else {
                let d = (x * x + y * y).sqrt();
                if d > 0.0 {
                    forces[i].0 -= params.gravity * masses[i] * x / d;
                    forces[i].1 -= params.gravity * masses[i] * y / d;
                }
            }
        }

        // Adaptive speed from swinging vs traction.
        let mut total_swinging = 0.0;
        let mut total_traction = 0.0;
        for i in 0..n {
            let (fx, fy) = forces[i];
            let (px, py) = previous_forces[i];
            let swinging = ((fx - px).powi(2) + (fy - py).powi(2)).sqrt();
            let traction = ((fx + px).powi(2) + (fy + py).powi(2)).sqrt() / 2.0;
            total_swinging += masses[i] * swinging;
            total_traction += masses[i] * traction;
        }
        let target = params.jitter_tolerance * params.jitter_tolerance * total_traction
            / total_swinging.max(1e-12);
        global_speed = target.min(global_speed * 1.5).max(1e-6);

        let mut energy = 0.0;
        for i in 0..n {
            let (fx, fy) = forces[i];
            let (px, py) = previous_forces[i];
            let swinging =
                masses[i] * ((fx - px).powi(2) + (fy - py).powi(2)).sqrt();
            let factor = global_speed / (1.0 + (global_speed * swinging).sqrt());
            let dx = fx * factor;
            let dy = fy * factor;
            positions[i].0 += dx;
            positions[i].1 += dy;
            energy += dx * dx + dy * dy;
        }
        kinetic_energy.push(energy);
        previous_forces = forces;
    }

    LayoutResult {
        positions,
        kinetic_energy,
    }
}

// The insert path in QuadTree needs body positions when subdividing; keep the
// build function separate so it can capture them.
fn build_tree(points: &[(f64, f64)], masses: &[f64]) -> Vec<Cell> {
    let mut min = (f64::INFINITY, f64::INFINITY);
    let mut max = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        min.0 = min.0.min(p.0);
        min.1 = min.1.min(p.1);
        max.0 = max.0.max(p.0);
        max.1 = max.1.max(p.1);
    }
    let half = ((max.0 - min.0).max(max.1 - min.1) / 2.0).max(1e-9) * 1.001;
    let center = ((min.0 + max.0) / 2.0, (min.1 + max.1) / 2.0);
    let mut cells = vec![Cell {
        center,
        half,
        mass: 0.0,
        center_of_mass: (0.0, 0.0),
        body: None,
        children: None,
    }];

    fn insert(
        cells: &mut Vec<Cell>,
        idx: usize,
        body: usize,
        points: &[(f64, f64)],
        masses: &[f64],
        depth: usize,
    ) {
        let p = points[body];
        let m = masses[body];
        cells[idx].mass += m;
        cells[idx].center_of_mass.0 += m * p.0;
        cells[idx].center_of_mass.1 += m * p.1;

        if cells[idx].children.is_none() {
            match cells[idx].body {
                None => {
                    cells[idx].body = Some(body);
                    return;
                }
                Some(existing) => {
                    if depth > 48 {
                        // Coincident points: leave both accounted in mass.
                        return;
                    }
                    let (center, half) = (cells[idx].center, cells[idx].half);
                    let mut children = [0usize; 4];
                    for (q, slot) in children.iter_mut().enumerate() {
                        cells.push(Cell {
                            center: child_center(center, half, q),
                            half: half / 2.0,
                            mass: 0.0,
                            center_of_mass: (0.0, 0.0),
                            body: None,
                            children: None,
                        });
                        *slot = cells.len() - 1;
                    }
                    cells[idx].children = Some(children);
                    cells[idx].body = None;
                    let q = quadrant(center, points[existing]);
                    insert(cells, children[q], existing, points, masses, depth + 1);
                }
            }
        }
        let children = cells[idx].children.unwrap();
        let q = quadrant(cells[idx].center, p);
        insert(cells, children[q], body, points, masses, depth + 1);
    }

    for body in 0..points.len() {
        insert(&mut cells, 0, body, points, masses, 0);
    }
    // Normalize centers of mass.
    for c in &mut cells {
        if c.mass > 0.0 {
            c.center_of_mass.0 /= c.mass;
            c.center_of_mass.1 /= c.mass;
        }
    }
    cells
}

fn repulsion_on(
    cells: &[Cell],
    points: &[(f64, f64)],
    masses: &[f64],
    i: usize,
    theta: f64,
) -> (f64, f64) {
    let mut out = (0.0, 0.0);
    let mut stack = vec![0usize];
    let p = points[i];
    while let Some(idx) = stack.pop() {
        let cell = &cells[idx];
        if cell.mass == 0.0 {
            continue;
        }
        let dx = p.0 - cell.center_of_mass.0;
        let dy = p.1 - cell.center_of_mass.1;
        let d2 = dx * dx + dy * dy;
        let size = cell.half * 2.0;
        let use_cell = match cell.children {
            None => true,
            Some(_) => d2 > 0.0 && (size * size) / d2 < theta * theta,
        };
        if use_cell {
            if let Some(body) = cell.body {
                if body == i {
                    continue;
                }
            }
            if d2 > 0.0 {
                // F = m_i * m_j / d along the unit separation, i.e. each
                // component is m_i * m_j * delta / d^2.
                let f = masses[i] * cell.mass / d2.max(1e-12);
                out.0 += f * dx;
                out.1 += f * dy;
            }
        } else if let Some(children) = cell.children {
            for c in children {
                stack.push(c);
            }
        }
    }
    out
}
