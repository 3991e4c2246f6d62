use super::{create_dir, write_text};
use crate::args::GradcheckArgs;
use crate::error::{CliError, Result};
use crate::manifest::RunManifest;
use hyperprobe::gradcheck::{run_all, GradResult};
use serde::Serialize;

#[derive(Serialize)]
struct Resolved {
    seed: u64,
    tol: f64,
    corrupt_gradient: bool,
}

fn table(results: &[GradResult]) -> String {
    let mut out = String::from("variant\tmax_rel_error\tcoordinates\tfrozen_heads_zero\tstatus\n");
    for r in results {
        out += &format!(
            "{}\t{:.3e}\t{}\t{}\t{}\n",
            r.variant,
            r.max_rel_error,
            r.coordinates,
            r.frozen_heads_zero,
            if r.passed { "PASS" } else { "FAIL" }
        );
    }
    out
}

pub fn run(a: &GradcheckArgs) -> Result<()> {
    if !(a.tol.is_finite() && a.tol > 0.0) {
        return Err(CliError::usage("--tol must be positive"));
    }
    let m = RunManifest::start("gradcheck", Some(a.seed), &Resolved { seed: a.seed, tol: a.tol, corrupt_gradient: a.corrupt_gradient });
    let results = run_all(a.seed, a.tol, a.corrupt_gradient);
    let text = table(&results);
    print!("{text}");
    if let Some(out) = &a.out {
        create_dir(out)?;
        let path = out.join("gradcheck.tsv");
        write_text(&path, &text)?;
        let mut m = m;
        m.output("table", &path)?;
        m.finish(out)?;
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("{} of {} variants passed (tol {:e})", results.len() - failed, results.len(), a.tol);
    if failed > 0 {
        return Err(CliError::numerical(format!("{failed} loss variants failed the gradient check")));
    }
    Ok(())
}
