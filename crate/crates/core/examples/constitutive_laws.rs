//! Tabulate the built-in viscosity and pressure laws and run the validators.

use kappa_ns::constitutive::{
    gamma_minus_threshold, validate_drag_hypotheses, validate_exponents, ConstitutiveSet,
    DensityRange, PressureLaw, ViscosityLaw,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let laws = [
        ("linear", ViscosityLaw::Linear),
        ("single_power m=0.9", ViscosityLaw::single_power(0.9, 1.0)?),
        ("power_law_pair n=0.8 m=1", ViscosityLaw::power_law_pair(0.8, 1.0, 1.0, 1.0, 1.0)?),
    ];
    let pressure = PressureLaw::singular_cold(1.0, 3.0, 2.0, 1.0)?;
    for (name, law) in laws {
        let set = ConstitutiveSet::new(law, pressure);
        println!("{name}");
        println!("  {:>10} {:>12} {:>12} {:>12} {:>12}", "rho", "mu", "lambda", "phi", "p");
        for rho in [0.1, 0.5, 1.0, 2.0, 10.0] {
            println!(
                "  {rho:>10} {:>12.6} {:>12.6} {:>12.6} {:>12.6}",
                set.mu(rho)?,
                set.lambda_bd(rho)?,
                set.phi(rho)?,
                set.pressure(rho)?
            );
        }
        let inv = set.check_invariants(DensityRange::default(), 200);
        println!("  invariants pass: {}", inv.passed());
    }

    println!("gamma_minus threshold at n = m = 1: {}", gamma_minus_threshold(1.0, 1.0));
    for gm in [0.99, 1.01] {
        let report = validate_exponents(1.0, 1.0, gm, 2.0);
        println!("exponents (n=1, m=1, gamma_minus={gm}) pass: {}", report.passed());
        for c in report.failures() {
            println!("  failed: {} (value {}, threshold {})", c.name, c.value, c.threshold);
        }
    }

    let bd = ConstitutiveSet::new(ViscosityLaw::Linear, PressureLaw::gamma_law(1.0, 2.0)?);
    let drag = validate_drag_hypotheses(&bd, 0.5, 0.75, 2.0, DensityRange::default());
    println!("drag hypotheses for mu = rho, nu = 0.5: {}", drag.passed());
    Ok(())
}
