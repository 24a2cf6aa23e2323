//! Initial densities, rescaled to an exact total mass.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{InitialKind, InitialSection};
use crate::error::{Error, Result};
use crate::grid::{total_mass, Field};

/// Lattice and domain for [`build_initial`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridParams {
    pub dims: usize,
    pub cells: usize,
    pub dx: f64,
}

impl GridParams {
    pub fn length(&self) -> f64 {
        self.cells as f64 * self.dx
    }
}

/// Whether the cell at `x` lies inside the cube of half-width `a` about `c`.
fn in_box(x: &[f64], c: &[f64], a: f64, dx: f64) -> bool {
    x.iter().zip(c).all(|(xi, ci)| (xi - ci).abs() + 0.5 * dx <= a + 1e-9 * dx)
}

/// `count` evenly spaced centres per axis, snapped to cell faces so that
/// every box covers the same number of cells.
fn lattice_centers(count: usize, g: &GridParams) -> Vec<Vec<f64>> {
    let length = g.length();
    let coords: Vec<f64> = (0..count)
        .map(|k| {
            let from_left = (k as f64 + 0.5) * length / count as f64;
            -0.5 * length + (from_left / g.dx).round() * g.dx
        })
        .collect();
    if g.dims == 1 {
        coords.iter().map(|&x| vec![x]).collect()
    } else {
        coords
            .iter()
            .flat_map(|&y| coords.iter().map(move |&x| vec![x, y]))
            .collect()
    }
}

/// Initial density on the lattice centred at the origin, scaled so that its
/// mass equals `spec.mass`.
pub fn build_initial(spec: &InitialSection, g: &GridParams) -> Result<Field> {
    if !(spec.mass > 0.0) {
        return Err(Error::config("initial.mass", format!("must be positive, got {}", spec.mass)));
    }
    let shape = vec![g.cells; g.dims];
    let mut field = Field::centered(&shape, g.dx)?;
    let width = 2.0 * spec.half_width;
    let boxed = matches!(spec.kind, InitialKind::Box | InitialKind::Boxes);
    if boxed && width > g.length() {
        return Err(Error::config(
            "initial.half_width",
            format!("box of width {width} exceeds the domain length {}", g.length()),
        ));
    }
    let centers = match spec.kind {
        InitialKind::Box => vec![vec![0.0; g.dims]],
        InitialKind::Boxes => match (&spec.centers, spec.count) {
            (Some(c), _) => c.clone(),
            (None, Some(n)) if n > 0 => lattice_centers(n, g),
            _ => return Err(Error::config("initial.centers", "boxes needs centers or count")),
        },
        _ => Vec::new(),
    };
    let values: Vec<f64> = match spec.kind {
        InitialKind::Box | InitialKind::Boxes => (0..field.len())
            .map(|i| {
                let x = field.center(i);
                f64::from(centers.iter().any(|c| in_box(&x, c, spec.half_width, g.dx)))
            })
            .collect(),
        InitialKind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            (0..field.len())
                .map(|_| {
                    let occupied = rng.gen::<f64>() < spec.fraction;
                    let height = rng.gen::<f64>();
                    if occupied {
                        height
                    } else {
                        0.0
                    }
                })
                .collect()
        }
        InitialKind::Constant => vec![1.0; field.len()],
    };
    field.data_mut().copy_from_slice(&values);
    let raw = total_mass(&field);
    if !(raw > 0.0) {
        return Err(Error::config("initial", "initial condition occupies no cell"));
    }
    field.scale(spec.mass / raw);
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: InitialKind, mass: f64) -> InitialSection {
        InitialSection {
            kind,
            mass,
            half_width: 10.0,
            centers: None,
            count: None,
            seed: 7,
            fraction: 1.0,
        }
    }

    const LINE: GridParams = GridParams { dims: 1, cells: 200, dx: 0.4 };
    const SQUARE: GridParams = GridParams { dims: 2, cells: 100, dx: 0.4 };

    #[test]
    fn box_heights() {
        let f = build_initial(&spec(InitialKind::Box, 40.0), &LINE).unwrap();
        let occupied: Vec<f64> = f.data().iter().copied().filter(|&v| v > 0.0).collect();
        assert_eq!(occupied.len(), 50);
        assert!(occupied.iter().all(|&v| (v - 2.0).abs() < 1e-14));
        assert!((total_mass(&f) - 40.0).abs() < 1e-12 * 40.0);
    }

    #[test]
    fn box_is_symmetric() {
        let f = build_initial(&spec(InitialKind::Box, 40.0), &LINE).unwrap();
        let d = f.data();
        assert!((0..200).all(|i| d[i] == d[199 - i]));
    }

    #[test]
    fn random_is_deterministic() {
        let mut s = spec(InitialKind::Random, 50.0);
        s.fraction = 0.3;
        let a = build_initial(&s, &LINE).unwrap();
        let b = build_initial(&s, &LINE).unwrap();
        assert_eq!(a, b);
        s.seed = 8;
        assert_ne!(a, build_initial(&s, &LINE).unwrap());
        assert!((total_mass(&a) - 50.0).abs() < 1e-12 * 50.0);
        assert!(a.data().iter().any(|&v| v == 0.0));
    }

    #[test]
    fn evenly_spaced_boxes_in_2d() {
        let mut s = spec(InitialKind::Boxes, 60.0);
        s.half_width = 2.0;
        s.count = Some(3);
        let f = build_initial(&s, &SQUARE).unwrap();
        let occupied = f.data().iter().filter(|&&v| v > 0.0).count();
        assert_eq!(occupied, 9 * 10 * 10);
        assert!((total_mass(&f) - 60.0).abs() < 1e-12 * 60.0);
        let h = f.max();
        assert!(f.data().iter().all(|&v| v == 0.0 || (v - h).abs() < 1e-14 * h));
    }

    #[test]
    fn explicit_centers() {
        let mut s = spec(InitialKind::Boxes, 10.0);
        s.half_width = 1.2;
        s.centers = Some(vec![vec![-10.0], vec![10.0]]);
        let f = build_initial(&s, &LINE).unwrap();
        assert_eq!(f.data().iter().filter(|&&v| v > 0.0).count(), 12);
        assert!(f.data()[100] == 0.0);
    }

    #[test]
    fn constant_field() {
        let f = build_initial(&spec(InitialKind::Constant, 80.0), &LINE).unwrap();
        assert!(f.data().iter().all(|&v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn errors() {
        let mut s = spec(InitialKind::Box, 40.0);
        s.half_width = 41.0;
        assert!(matches!(build_initial(&s, &LINE), Err(Error::Config { .. })));
        assert!(build_initial(&spec(InitialKind::Box, 0.0), &LINE).is_err());
        assert!(build_initial(&spec(InitialKind::Box, -1.0), &LINE).is_err());
    }
}
