//! The explore → prove → explain pipeline for one case.

use std::path::Path;

use anyhow::{Context, Result};
use csaopt_core::baselines::{bl1_density_greedy, bl2_bucket_first, bl3_with_repair};
use csaopt_core::certifier::{certify, ucap_precheck, CertStatus, CertificationReport};
use csaopt_core::explorer::hybrid_optimize;
use csaopt_core::governance::{emit_bundle, now, BundleInputs, ModelRun};
use csaopt_core::requirement::BStarReport;
use csaopt_core::{CaseInput, Error, Problem};

pub struct RunOutcome {
    pub status: CertStatus,
    pub certification: CertificationReport,
    pub b_star: Option<BStarReport>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> u8 {
        match self.status {
            CertStatus::Optimal | CertStatus::Feasible => 0,
            CertStatus::Infeasible => 2,
        }
    }
}

pub fn load_case(path: &Path) -> Result<CaseInput> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let case = csaopt_core::parse_case(&bytes)?;
    case.validate()?;
    Ok(case)
}

pub fn run(case: CaseInput, out: &Path) -> Result<RunOutcome> {
    let started = now();
    let limits = case.solver_limits.clone();
    limits.validate()?;
    let p = Problem::new(case)?;

    let bl1 = bl1_density_greedy(&p);
    let bl2 = bl2_bucket_first(&p);
    let bl3 = bl3_with_repair(&p);
    let mut models = vec![
        ModelRun::evaluate("BL-1", &bl1, &p),
        ModelRun::evaluate("BL-2", &bl2, &p),
        ModelRun::evaluate("BL-3", &bl3, &p),
    ];

    let (hybrid, hybrid_error) = match hybrid_optimize(&p, &limits) {
        Ok(h) => (Some(h), None),
        Err(Error::NoFeasible(msg)) => (None, Some(msg)),
        Err(e) => return Err(e.into()),
    };
    if let Some(h) = &hybrid {
        models.push(ModelRun::evaluate("hybrid", &h.best, &p));
    }

    let b_star = match ucap_precheck(&p) {
        Ok(b) => Some(b),
        Err(Error::InfeasibleBase { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let incumbent = hybrid.as_ref().map_or(&bl3, |h| &h.best);
    let certification = certify(&p, incumbent, &limits)?;

    emit_bundle(
        out,
        &BundleInputs {
            problem: &p,
            models: &models,
            hybrid: hybrid.as_ref(),
            hybrid_error,
            certification: Some(&certification),
            b_star: b_star.as_ref(),
            limits: &limits,
            started,
        },
    )?;
    Ok(RunOutcome {
        status: certification.status,
        certification,
        b_star,
    })
}
