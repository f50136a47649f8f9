//! Differential operators, mollification and dealiasing on a periodic grid.

use kappa_ns::torus_fields::{self as tf, GridSpec, PeriodicField};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = GridSpec::new(2, 32)?;
    let f = PeriodicField::scalar_from_fn(grid, |x| (x[0] + 2.0 * x[1]).sin());

    // ∇·∇f = Δf = −5 f for this mode
    let div_grad = tf::div(&tf::grad(&f)?)?;
    let lap = tf::laplacian(&f);
    println!("|div grad f - lap f|_inf = {:e}", div_grad.sub(&lap)?.max_abs());
    println!("|lap f + 5 f|_inf       = {:e}", lap.axpy(5.0, &f)?.max_abs());

    let u = PeriodicField::vector_from_fn(grid, |x, c| if c == 0 { x[1].sin() } else { 0.0 });
    println!("curl of a shear flow, max = {:.6}", tf::curl(&u)?.max_abs());
    println!("integral of div u = {:e}", tf::integrate(&tf::div(&u)?)?);

    for delta in [0.0, 0.1, 0.5] {
        let m = tf::mollify(&f, delta)?;
        println!("mollified amplitude at delta = {delta}: {:.6}", m.max_abs());
    }

    let rough = PeriodicField::scalar_from_fn(grid, |x| (15.0 * x[0]).cos() + x[1].cos());
    println!("after dealiasing the k = 15 mode: max = {:.6}", rough.dealias().max_abs());
    Ok(())
}
