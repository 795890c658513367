//! Stage functions shared by the subcommands. Each takes already-loaded
//! inputs and returns plain values; writing files is left to [`crate::run`].

use anyhow::{bail, Context, Result};

use hwnas_core::rng::{labeled_seed, stream};
use hwnas_core::{
    evolve, run_shrink, AccuracyOracle, ConstantOracle, DeviceProfile, DeviceTemplate, EaConfig,
    Executor, Objective, ObjectiveConfig, SearchReport, SearchSpace, ShrinkPlan, ShrinkTrace,
    SimDeviceConfig, SurrogateOracle,
};

use crate::config::OracleSpec;
use crate::formats::MeasurementLog;

/// Seeds of every randomized stage, all derived from one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seeds {
    pub device: u64,
    pub profile: u64,
    pub oracle: u64,
    pub shrink: u64,
    pub search: u64,
}

impl Seeds {
    pub fn derive(master: u64) -> Self {
        Self {
            device: labeled_seed(master, "device"),
            profile: labeled_seed(master, "profile"),
            oracle: labeled_seed(master, "oracle"),
            shrink: labeled_seed(master, "shrink"),
            search: labeled_seed(master, "search"),
        }
    }
}

pub fn generate_device(template: &str, space: &SearchSpace, seed: u64) -> Result<SimDeviceConfig> {
    let t: DeviceTemplate = template.parse()?;
    Ok(t.build(space, seed))
}

/// Builds the lookup table from the simulator, measures `m` sampled
/// architectures (plus `holdout` more for an out-of-sample check) and
/// calibrates the bias.
pub fn profile_device(
    device: &SimDeviceConfig,
    space: &SearchSpace,
    m: usize,
    holdout: usize,
    seed: u64,
) -> Result<(DeviceProfile, MeasurementLog)> {
    if m == 0 {
        bail!("at least one calibration measurement is needed");
    }
    device.validate()?;
    device.base_cost.covers(space).context("device table does not cover the space")?;
    let mut rng = stream(seed);
    let mut draw = |n: usize| -> Result<Vec<_>> {
        (0..n)
            .map(|_| {
                let arch = space.sample(&mut rng);
                Ok(device.measure(&arch, &mut rng)?)
            })
            .collect()
    };
    let calibration = draw(m)?;
    let holdout = draw(holdout)?;
    let profile = DeviceProfile::new(device.name.clone(), device.batch_size, device.export_true_table())
        .calibrate_bias(&calibration)?;
    let holdout_rmse_ms = if holdout.is_empty() {
        None
    } else {
        Some(profile.rmse(&holdout)?)
    };
    let log = MeasurementLog {
        device_name: device.name.clone(),
        seed,
        calibration,
        holdout,
        holdout_rmse_ms,
    };
    Ok((profile, log))
}

pub fn build_oracle(spec: &OracleSpec, space: &SearchSpace, seed: u64) -> Result<Box<dyn AccuracyOracle>> {
    Ok(match spec {
        OracleSpec::Surrogate { params } => Box::new(SurrogateOracle::generate(space, seed, params)),
        OracleSpec::Constant { accuracy } => {
            if !(0.0..=1.0).contains(accuracy) {
                bail!("constant accuracy {accuracy} outside [0, 1]");
            }
            Box::new(ConstantOracle(*accuracy))
        }
    })
}

pub fn shrink<E: Executor>(
    space: &SearchSpace,
    plan: &ShrinkPlan,
    objective: &Objective<'_>,
    seed: u64,
    exec: &E,
) -> Result<(SearchSpace, ShrinkTrace)> {
    Ok(run_shrink(space, plan, objective, seed, exec)?)
}

pub fn search<E: Executor>(
    space: &SearchSpace,
    objective: &Objective<'_>,
    ea: &EaConfig,
    seed: u64,
    exec: &E,
) -> Result<SearchReport> {
    let ea = EaConfig { seed, ..ea.clone() };
    Ok(evolve(space, objective, &ea, exec)?)
}

pub fn objective<'a>(
    config: ObjectiveConfig,
    profile: &'a DeviceProfile,
    oracle: &'a dyn AccuracyOracle,
    space: &SearchSpace,
) -> Result<Objective<'a>> {
    profile.table.covers(space).context("profile table does not cover the space")?;
    Ok(Objective::new(config, profile, oracle)?)
}
