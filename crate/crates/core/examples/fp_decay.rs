//! Entropy, Fisher information and total variation along the Fokker-Planck
//! flow of a 1-D OU process, with fitted decay rates.

use nibec::catalog::build_ou;
use nibec::entropy::{EntropyGenerator, EntropyKind};
use nibec::fokker_planck::{
    decay_rate_fit, evolve_with, fisher_decay_fit, gaussian, project_density, stationary_density, trajectory_rows,
    FokkerPlanckOperator,
};
use nibec::grid::GridSpec;
use nibec::model::DiffusionModel;

fn main() -> nibec::Result<()> {
    let ou = build_ou(1, 1.0, 1.0)?;
    let (lo, hi) = ou.recommended_box();
    let grid = GridSpec::new(&lo, &hi, &[512])?;
    let op = FokkerPlanckOperator::new(&ou, &grid)?;
    let p0 = project_density(gaussian(vec![1.0], 0.5), &grid)?;
    let pinf = stationary_density(&ou, &grid)?;

    let t_end = 4.0;
    let every = 200;
    let steps = ((t_end / op.stability_limit()).ceil() as usize).div_ceil(every) * every;
    let traj = evolve_with(&op, &p0, t_end, t_end / steps as f64, every)?;

    println!("{:>6} {:>12} {:>12} {:>12} {:>12}", "t", "H_kl", "H_chi2", "I_kl", "TV");
    for r in trajectory_rows(&traj, &pinf, &ou)?.iter().step_by(4) {
        println!("{:>6.3} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e}", r.t, r.h_kl, r.h_chi2, r.i_kl, r.tv);
    }
    for kind in [EntropyKind::Kl, EntropyKind::Chi2] {
        let u = EntropyGenerator::builtin(kind)?;
        let h = decay_rate_fit(&traj, &pinf, &u, [2.0, 4.0])?;
        let i = fisher_decay_fit(&traj, &pinf, &ou, &u, [2.0, 4.0])?;
        println!("{}: entropy rate {:.4}, Fisher rate {:.4} (2λ = 2)", u.name(), h.rate, i.rate);
    }
    Ok(())
}
