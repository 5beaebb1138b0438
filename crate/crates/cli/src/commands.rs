use crate::settings::{CliError, Settings};
use krylovkn::knselect::SelectionConfig;
use krylovkn::lanczos::{LanczosOptions, Reorth};
use krylovkn::linalg::DenseBlock;
use krylovkn::mmio::{load_instance, save_instance};
use krylovkn::problems::{build_diffusion_2d, build_halfline_1d, build_maxwell_yee_3d, GridSpec, LoopSource, ProblemInstance, SigmaField};
use krylovkn::quadrature::Rule;
use krylovkn::reference::{reference_transfer_many, ReferenceOptions};
use krylovkn::selftest::run_selftest;
use krylovkn::sweep::{log_shifts, run_convergence, ConvergenceOptions, SweepRow};
use num_complex::Complex64;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

fn cfg_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn run_err(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// `ix:iy[:iz]` node index.
fn parse_node<const N: usize>(s: &str) -> Result<[usize; N], String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != N {
        return Err(format!("'{s}' needs {N} colon-separated indices"));
    }
    let mut out = [0; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.trim().parse().map_err(|e| format!("'{s}': {e}"))?;
    }
    Ok(out)
}

struct LoopArg(LoopSource);

impl FromStr for LoopArg {
    type Err = String;
    /// `ix:iy:iz:axis` with axis one of `x`, `y`, `z`.
    fn from_str(s: &str) -> Result<Self, String> {
        let (node, axis) = s.rsplit_once(':').ok_or_else(|| format!("'{s}' should look like 5:5:6:z"))?;
        let normal = match axis.trim() {
            "x" => 0,
            "y" => 1,
            "z" => 2,
            a => return Err(format!("unknown loop axis '{a}'")),
        };
        Ok(LoopArg(LoopSource { node: parse_node::<3>(node)?, normal }))
    }
}

struct Node2(pub [usize; 2]);

impl FromStr for Node2 {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        parse_node::<2>(s).map(Node2)
    }
}

/// Builds the generator named by `--problem`.
pub fn build_problem(set: &Settings) -> Result<ProblemInstance, CliError> {
    let problem: String = set.get("problem")?.ok_or_else(|| CliError::Config("--problem is required".into()))?;
    let sigma: SigmaField = set.get_or("sigma", SigmaField::constant(1.0))?;
    let nopt = set.get_or("nopt", 10usize)?;
    match problem.as_str() {
        "halfline" => build_halfline_1d(set.get_or("n", 20000usize)?).map_err(cfg_err),
        "diffusion2d" => {
            let (nx, ny) = (set.get_or("nx", 120usize)?, set.get_or("ny", 120usize)?);
            let mut tr: Vec<[usize; 2]> = set.list::<Node2>("transducer", ';')?.into_iter().map(|t| t.0).collect();
            if tr.is_empty() {
                tr.push([nx / 2, ny / 2]);
            }
            build_diffusion_2d(&GridSpec::new(vec![nx, ny], nopt), &sigma, &tr).map_err(cfg_err)
        }
        "maxwell3d" => {
            let dims = [set.get_or("nx", 12usize)?, set.get_or("ny", 12usize)?, set.get_or("nz", 12usize)?];
            let mut loops: Vec<LoopSource> = set.list::<LoopArg>("loop", ';')?.into_iter().map(|l| l.0).collect();
            if loops.is_empty() {
                loops.push(LoopSource {
                    node: [dims[0] / 2 - 1, dims[1] / 2 - 1, dims[2] / 2],
                    normal: 2,
                });
            }
            let mu0 = set.get_or("mu0", 1.0f64)?;
            build_maxwell_yee_3d(&GridSpec::new(dims.to_vec(), nopt), &sigma, mu0, &loops)
                .map(|(p, _)| p)
                .map_err(cfg_err)
        }
        other => Err(CliError::Config(format!("unknown problem '{other}' (expected halfline, diffusion2d or maxwell3d)"))),
    }
}

/// `gen`: writes `A.mtx`, `B.mtx`, `meta.kv` and prints the sizes.
pub fn cmd_gen(set: &Settings, out: &mut impl Write) -> Result<(), CliError> {
    let p = build_problem(set)?;
    let dir: PathBuf = set.get_or("out", PathBuf::from("."))?;
    save_instance(&dir, &p).map_err(|e| CliError::Io(e.to_string()))?;
    let stored = p.operator.nnz_lower();
    let nnz = 2 * stored - p.n();
    writeln!(out, "n={} nnz={} stored={} p={} dir={}", p.n(), nnz, stored, p.p(), dir.display())?;
    Ok(())
}

struct LogSweep {
    start: f64,
    stop: f64,
    count: usize,
    imaginary: bool,
}

impl FromStr for LogSweep {
    type Err = String;
    /// `start:stop:count:axis` with axis `real` or `imag`.
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let [a, b, c, axis] = parts.as_slice() else {
            return Err(format!("'{s}' should look like 1e-5:1:20:real"));
        };
        let num = |x: &str| x.parse::<f64>().map_err(|e| format!("'{x}': {e}"));
        let (start, stop) = (num(a)?, num(b)?);
        let count = c.parse::<usize>().map_err(|e| format!("'{c}': {e}"))?;
        let imaginary = match *axis {
            "real" => false,
            "imag" => true,
            _ => return Err(format!("axis must be real or imag, got '{axis}'")),
        };
        if !(start > 0.0 && stop > 0.0) || count == 0 {
            return Err(format!("'{s}': bounds must be positive and count nonzero"));
        }
        Ok(Self { start, stop, count, imaginary })
    }
}

/// Everything `run` and `sweep` need, resolved from the layered settings.
pub struct RunConfig {
    pub instance: ProblemInstance,
    pub m: usize,
    pub shifts: Vec<Complex64>,
    pub reference: bool,
    pub timing: bool,
    pub output: Option<PathBuf>,
    pub options: ConvergenceOptions,
}

impl RunConfig {
    pub fn resolve(set: &Settings, fixed_m: bool) -> Result<Self, CliError> {
        let instance = match set.get::<PathBuf>("matrix")? {
            Some(a) => {
                let b: PathBuf = set.require("rhs")?;
                load_instance(&a, &b).map_err(|e| CliError::Io(e.to_string()))?
            }
            None => build_problem(set)?,
        };
        let m: usize = set.get_or("m", 100)?;
        if m == 0 {
            return Err(CliError::Config("--m must be at least 1".into()));
        }
        let stride = if fixed_m { m } else { set.get_or("stride", 10usize)? };
        let mut rules: Vec<Rule> = set.list("rules", ',')?;
        if rules.is_empty() {
            rules = Rule::ALL.to_vec();
        }
        let mut shifts: Vec<Complex64> = set.list("shifts", ',')?;
        for sw in set.list::<LogSweep>("sweep", ';')? {
            shifts.extend(log_shifts(sw.start, sw.stop, sw.count, sw.imaginary));
        }
        if shifts.is_empty() {
            return Err(CliError::Config("no shifts: pass --shifts or --sweep".into()));
        }

        let d = SelectionConfig::default();
        let selection = SelectionConfig {
            epsilon: set.get("epsilon")?,
            epsilon_rel: set.get_or("epsilon-rel", d.epsilon_rel)?,
            n_quad: set.get_or("n-quad", d.n_quad)?,
            d_fraction: set.get_or("d-fraction", d.d_fraction)?,
            support_threshold: set.get_or("support-threshold", d.support_threshold)?,
            restarts: set.get_or("restarts", d.restarts)?,
            seed: set.get_or("seed", d.seed)?,
            match_count: set.get_or("match-count", d.match_count)?,
            ..d
        };
        selection.validate().map_err(cfg_err)?;
        let reorth = match set.raw("reorth") {
            None | Some("auto") => None,
            Some("full") => Some(Reorth::Full),
            Some("none") => Some(Reorth::None),
            Some(o) => return Err(CliError::Config(format!("--reorth expects auto, full or none, got '{o}'"))),
        };
        let options = ConvergenceOptions {
            rules,
            selection,
            lanczos: LanczosOptions { reorth, ..Default::default() },
            stride,
            smoothing: set.get("smoothing")?,
        };
        Ok(Self {
            instance,
            m,
            shifts,
            reference: set.switch("reference", false)?,
            timing: set.switch("timing", true)?,
            output: set.get("output")?,
            options,
        })
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn csv_header(p: usize) -> Vec<String> {
    let mut h: Vec<String> = ["m", "rule", "re_s", "im_s"].iter().map(|s| s.to_string()).collect();
    for part in ["re", "im"] {
        for i in 1..=p {
            for j in 1..=p {
                h.push(format!("value_{part}_{i}_{j}"));
            }
        }
    }
    h.extend(["error", "phi", "varphi", "omega_support_d", "wall_ms"].iter().map(|s| s.to_string()));
    h
}

pub fn csv_record(row: &SweepRow, timing: bool) -> Vec<String> {
    let v = &row.sample.value;
    let p = v.rows();
    let mut r = vec![row.m.to_string(), row.sample.rule.to_string(), num(row.sample.s.re), num(row.sample.s.im)];
    r.extend((0..p * p).map(|k| num(v[(k / p, k % p)].re)));
    r.extend((0..p * p).map(|k| num(v[(k / p, k % p)].im)));
    r.push(row.sample.error_vs_reference.map(num).unwrap_or_default());
    let (phi, varphi) = row.kn.as_ref().map(|k| k.scalars()).map_or((String::new(), String::new()), |(a, b)| (num(a), num(b)));
    r.push(phi);
    r.push(varphi);
    r.push(row.omega_support_d.map(num).unwrap_or_default());
    r.push(num(if timing { row.wall_ms } else { 0.0 }));
    r
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?),
        None => Box::new(io::stdout().lock()),
    })
}

/// `run` (stride from the settings) and `sweep` (a single checkpoint at `m`).
/// Rows are flushed after every checkpoint, so a failure keeps what was computed.
pub fn cmd_run(set: &Settings, fixed_m: bool) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(set, fixed_m)?;
    let p = &cfg.instance;
    let reference: Option<Vec<DenseBlock<Complex64>>> = if cfg.reference {
        let sol = reference_transfer_many(&p.operator, &p.rhs, &cfg.shifts, &ReferenceOptions::default()).map_err(run_err)?;
        Some(sol.into_iter().map(|r| r.value).collect())
    } else {
        None
    };

    let mut w = csv::Writer::from_writer(open_output(cfg.output.as_deref())?);
    w.write_record(csv_header(p.p())).map_err(|e| CliError::Io(e.to_string()))?;
    let mut io_err = None;
    let res = run_convergence(&p.operator, &p.rhs, cfg.m, &cfg.shifts, reference.as_deref(), &cfg.options, |rows| {
        if io_err.is_some() {
            return;
        }
        let r = rows.iter().try_for_each(|row| w.write_record(csv_record(row, cfg.timing))).and_then(|_| w.flush().map_err(Into::into));
        io_err = r.err();
    });
    w.flush()?;
    if let Some(e) = io_err {
        return Err(CliError::Io(e.to_string()));
    }
    res.map(|_| ()).map_err(run_err)
}

/// `selftest`: prints the report; fails naming the first failing suite.
pub fn cmd_selftest(out: &mut impl Write) -> Result<(), CliError> {
    let report = run_selftest();
    out.write_all(report.render().as_bytes())?;
    match report.first_failure() {
        None => Ok(()),
        Some(f) => Err(CliError::Runtime(format!("selftest failed: {}", f.name))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_specs() {
        let s: LogSweep = "1e-5:1:20:imag".parse().unwrap();
        assert_eq!((s.count, s.imaginary), (20, true));
        assert!("1:2:3".parse::<LogSweep>().is_err());
        assert!("0:2:3:real".parse::<LogSweep>().is_err());
        assert!("1:2:3:complex".parse::<LogSweep>().is_err());
    }

    #[test]
    fn loop_specs() {
        let l: LoopArg = "5:5:6:z".parse().unwrap();
        assert_eq!((l.0.node, l.0.normal), ([5, 5, 6], 2));
        assert!("5:5:z".parse::<LoopArg>().is_err());
    }

    #[test]
    fn header_layout() {
        let h = csv_header(2);
        assert_eq!(h.len(), 4 + 8 + 5);
        assert_eq!(h[4], "value_re_1_1");
        assert_eq!(h[11], "value_im_2_2");
        assert_eq!(h.last().unwrap(), "wall_ms");
    }

    #[test]
    fn numbers_carry_17_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(1.0 / 3.0).parse::<f64>().unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn missing_problem_is_a_config_error() {
        let s = Settings::from_maps(&[], &[]);
        assert_eq!(build_problem(&s).unwrap_err().exit_code(), 2);
        let s = Settings::from_maps(&[("problem", "torus")], &[]);
        assert_eq!(build_problem(&s).unwrap_err().exit_code(), 2);
    }
}
