//! Synthesizes the fiscal-monetary gains and prints the debt-ratio path of
//! each catch-up scenario.

use nashcost::fimo::{build_canonical, MacroParams};
use nashcost::scenario::{run_all_nine, ScenarioBase};
use nashcost::synthesis::{synthesize, SynthesisOptions};

fn main() -> nashcost::Result<()> {
    let params = MacroParams::default();
    let model = build_canonical(&params)?;
    let base = ScenarioBase::default();
    let x0 = [base.x0.z, base.x0.pi_tilde];
    let sol = synthesize(&model, &x0, &SynthesisOptions::default())?;
    println!(
        "V1 = {:.5}, V2 = {:.5}, K1 = {:?}, K2 = {:?}",
        sol.costs[0],
        sol.costs[1],
        sol.k1.as_slice(),
        sol.k2.as_slice()
    );
    for r in run_all_nine(&base, &sol, &params)? {
        let path: Vec<String> = r
            .records
            .iter()
            .step_by(4)
            .map(|x| format!("{:.3}", x.d))
            .collect();
        println!("{}  {}", r.label, path.join(" "));
    }
    Ok(())
}
