//! Drives the command-line runner in-process: prints a config with all
//! defaults, then simulates it.

fn main() {
    let dir = std::env::temp_dir().join("ttp-config-runner");
    std::fs::create_dir_all(&dir).expect("temp dir");
    let cfg = dir.join("run.cfg");
    std::fs::write(
        &cfg,
        format!(
            "[field]\nname = taylor_green_steady\n[particle]\nr0 = 0.4 1.2 0.3\nbeta = 0.5\n\
             [integrator]\nt_end = 2\n[output]\ndirectory = {}\nstride = 100\n",
            dir.join("out").display()
        ),
    )
    .expect("write config");
    let cfg = cfg.to_string_lossy().into_owned();
    let mut out = std::io::stdout();
    let mut err = std::io::stderr();
    ttp::cli::run(
        ["ttp", "simulate", &cfg, "--print-config"],
        &mut out,
        &mut err,
    );
    let code = ttp::cli::run(["ttp", "simulate", &cfg], &mut out, &mut err);
    println!("exit code {code}");
}
