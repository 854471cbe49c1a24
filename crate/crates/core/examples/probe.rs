use constraint_maps::geometry::ObstacleGeometry;
use constraint_maps::grid::*;
use constraint_maps::radial::*;
use constraint_maps::solver::*;

fn main() {
    let obstacle = ObstacleGeometry::ball(0.5, 2);
    let oracle = closed_form_radial(2, 0.5, &uniform_grid(1e-4));
    let r_a = oracle.r_a;
    for h_inv in [64usize, 128, 256] {
        let h = 1.0 / h_inv as f64;
        let domain = GridDomain::new(2, DomainShape::Ball { radius: 1.0 }, h);
        let boundary = |x: &[f64]| x.to_vec();
        let config = SolverConfig {
            init: InitStrategy::RadialSymmetric,
            grad_tol: 4.0 * h * h * h,
            max_iters: 20_000,
            ..SolverConfig::default()
        };
        let result = minimize(domain.clone(), &obstacle, 2, &boundary, &config).unwrap();
        for (name, field) in [("solved", result.field.clone()),
                              ("lift", MapField::from_fn(domain.clone(), 2, |x| {
                                  let r = (x[0]*x[0]+x[1]*x[1]).sqrt();
                                  let w = oracle.w_closed(r);
                                  vec![w*x[0]/r, w*x[1]/r]
                              }))] {
            let (res, l2_full) = el_residual(&field, &obstacle, 1e-7).unwrap();
            // trimmed norms: exclude singular core; optionally exclude FB band
            let core = 12.0 * h;
            let mut l2_nocore = 0.0f64;
            let mut l2_nocore_nofb = 0.0f64;
            for i in 0..domain.node_count() {
                let x = domain.coord(i);
                let r = (x[0]*x[0]+x[1]*x[1]).sqrt();
                let rr: f64 = res[2*i..2*i+2].iter().map(|v| v*v).sum();
                if r >= core {
                    l2_nocore += rr * h * h;
                    if (r - r_a).abs() > 3.0 * h { l2_nocore_nofb += rr * h * h; }
                }
            }
            println!("h=1/{h_inv} {name}: l2_full={:.4e} l2_nocore={:.4e} l2_nocore_nofb={:.4e}",
                     l2_full, l2_nocore.sqrt(), l2_nocore_nofb.sqrt());
        }
    }
}
