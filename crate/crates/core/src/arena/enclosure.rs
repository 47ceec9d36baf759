use crate::sim::geometry::{polygon_area, triangle_area, Vec2};

/// Triangle-fan decomposition of the agents around the evader.
#[derive(Debug, Clone, PartialEq)]
pub struct EnclosureGeometry {
    /// Agent indices sorted by polar angle around the evader.
    pub order: Vec<usize>,
    /// `triangle_areas[k]`: triangle of `order[k]`, `order[k + 1]` (cyclic) and the evader.
    pub triangle_areas: Vec<f64>,
    pub area_sum: f64,
    /// Area of the polygon through the ordered agents.
    pub total_area: f64,
    /// Distances to the evader, indexed like the agents.
    pub distances: Vec<f64>,
    pub min_distance: f64,
    pub max_distance: f64,
}

impl EnclosureGeometry {
    /// Relative tolerance of the area identity.
    pub const AREA_TOLERANCE: f64 = 1e-6;

    /// Whether the triangle fan exactly tiles the polygon, i.e. the evader is
    /// enclosed. Degenerate polygons never enclose.
    pub fn enclosed(&self) -> bool {
        self.total_area > 1e-12
            && (self.area_sum - self.total_area).abs() <= Self::AREA_TOLERANCE * self.total_area
    }
}

pub fn enclosure_geometry(agents: &[Vec2], evader: Vec2) -> EnclosureGeometry {
    let n = agents.len();
    let mut order: Vec<usize> = (0..n).collect();
    let angle = |i: usize| {
        let r = agents[i] - evader;
        r.y.atan2(r.x)
    };
    order.sort_by(|&a, &b| angle(a).total_cmp(&angle(b)).then(a.cmp(&b)));
    let triangle_areas: Vec<f64> = if n >= 3 {
        (0..n)
            .map(|k| triangle_area(agents[order[k]], agents[order[(k + 1) % n]], evader))
            .collect()
    } else {
        Vec::new()
    };
    let ring: Vec<Vec2> = order.iter().map(|&i| agents[i]).collect();
    let distances: Vec<f64> = agents.iter().map(|p| p.distance(evader)).collect();
    EnclosureGeometry {
        area_sum: triangle_areas.iter().sum(),
        total_area: polygon_area(&ring),
        triangle_areas,
        order,
        min_distance: distances.iter().copied().fold(f64::INFINITY, f64::min),
        max_distance: distances.iter().copied().fold(0.0, f64::max),
        distances,
    }
}
