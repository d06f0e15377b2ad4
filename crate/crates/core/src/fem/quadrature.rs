//! Symmetric quadrature rules on the reference triangle and the reference edge.

/// Points in barycentric coordinates with weights summing to 1 (the rule integrates
/// the mean; multiply by the element measure).
#[derive(Clone, Debug, PartialEq)]
pub struct TriangleRule {
    pub degree: usize,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

/// Points in `[0, 1]` with weights summing to 1.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeRule {
    pub degree: usize,
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

fn orbit3(a: f64, w: f64, pts: &mut Vec<[f64; 3]>, wts: &mut Vec<f64>) {
    let b = 1.0 - 2.0 * a;
    for p in [[b, a, a], [a, b, a], [a, a, b]] {
        pts.push(p);
        wts.push(w);
    }
}

fn orbit6(a: f64, b: f64, w: f64, pts: &mut Vec<[f64; 3]>, wts: &mut Vec<f64>) {
    let c = 1.0 - a - b;
    for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
        pts.push(p);
        wts.push(w);
    }
}

impl TriangleRule {
    /// Dunavant rules of degree 1, 2, 4 and 6.
    pub fn of_degree(degree: usize) -> Self {
        let mut pts = Vec::new();
        let mut wts = Vec::new();
        let degree = match degree {
            0 | 1 => {
                pts.push([1.0 / 3.0; 3]);
                wts.push(1.0);
                1
            }
            2 => {
                orbit3(1.0 / 6.0, 1.0 / 3.0, &mut pts, &mut wts);
                2
            }
            3 | 4 => {
                orbit3(0.445_948_490_915_964_9, 0.223_381_589_678_011_5, &mut pts, &mut wts);
                orbit3(0.091_576_213_509_770_74, 0.109_951_743_655_321_9, &mut pts, &mut wts);
                4
            }
            _ => {
                orbit3(0.249_286_745_170_910_4, 0.116_786_275_726_379_4, &mut pts, &mut wts);
                orbit3(0.063_089_014_491_502_23, 0.050_844_906_370_206_82, &mut pts, &mut wts);
                orbit6(0.053_145_049_844_816_95, 0.310_352_451_033_784_4, 0.082_851_075_618_373_58, &mut pts, &mut wts);
                6
            }
        };
        TriangleRule { degree, points: pts, weights: wts }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl EdgeRule {
    /// Gauss–Legendre rule with `n` points (exact to degree `2n − 1`), `n ∈ {1, 2, 3}`.
    pub fn gauss(n: usize) -> Self {
        let (points, weights) = match n {
            1 => (vec![0.5], vec![1.0]),
            2 => {
                let d = 0.5 / 3f64.sqrt();
                (vec![0.5 - d, 0.5 + d], vec![0.5, 0.5])
            }
            _ => {
                let d = 0.5 * (0.6f64).sqrt();
                (vec![0.5 - d, 0.5, 0.5 + d], vec![5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])
            }
        };
        let degree = 2 * points.len() - 1;
        EdgeRule { degree, points, weights }
    }

    /// The default degree-5 rule.
    pub fn standard() -> Self {
        Self::gauss(3)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
