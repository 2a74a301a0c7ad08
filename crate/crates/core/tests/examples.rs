// Runs the examples as tests so they cannot rot. Each example file is
// included into its own module; the ones that take arguments expose `run`.

mod family_quantities {
    include!("../examples/family_quantities.rs");
    pub fn check() {
        main().unwrap();
    }
}

mod incremental_qr {
    include!("../examples/incremental_qr.rs");
    pub fn check() {
        main().unwrap();
    }
}

mod separation {
    include!("../examples/separation.rs");
    pub fn check() {
        main().unwrap();
    }
}

mod dispersion {
    include!("../examples/dispersion.rs");
    pub fn check() {
        main().unwrap();
    }
}

mod one_vs_two_pass {
    include!("../examples/one_vs_two_pass.rs");
    pub fn check() {
        main().unwrap();
    }
}

mod chunked_csv_fit {
    include!("../examples/chunked_csv_fit.rs");
    pub fn check() {
        main().unwrap();
    }
}

#[allow(dead_code)]
mod highdim_logistic {
    include!("../examples/highdim_logistic.rs");
    pub fn check() {
        run(0.02, 1.0, true, 1).unwrap();
    }
}

#[allow(dead_code)]
mod flights_probit {
    include!("../examples/flights_probit.rs");
    pub fn check() {
        run(None).unwrap();
    }
}

#[test]
fn examples_run() {
    family_quantities::check();
    incremental_qr::check();
    separation::check();
    dispersion::check();
    one_vs_two_pass::check();
    chunked_csv_fit::check();
    highdim_logistic::check();
    flights_probit::check();
}
