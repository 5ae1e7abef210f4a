// Every example runs to completion.

mod calibrate_quick {
    include!("../examples/calibrate_quick.rs");

    #[test]
    fn runs() {
        run_example().unwrap();
    }
}

mod city_scene {
    include!("../examples/city_scene.rs");

    #[test]
    fn runs() {
        run_example().unwrap();
    }
}

mod detector_baselines {
    include!("../examples/detector_baselines.rs");

    #[test]
    fn runs() {
        run_example().unwrap();
    }
}

mod energy_detector {
    include!("../examples/energy_detector.rs");

    #[test]
    fn runs() {
        run_example().unwrap();
    }
}

mod gp_localization {
    include!("../examples/gp_localization.rs");

    #[test]
    fn runs() {
        run_example().unwrap();
    }
}

mod height_bound {
    include!("../examples/height_bound.rs");

    #[test]
    fn runs() {
        run_example().unwrap();
    }
}

mod music_rough_aoa {
    include!("../examples/music_rough_aoa.rs");

    #[test]
    fn runs() {
        run_example().unwrap();
    }
}

mod pipeline_run {
    include!("../examples/pipeline_run.rs");

    #[test]
    fn runs() {
        run_example().unwrap();
    }
}

mod refine_manifold {
    include!("../examples/refine_manifold.rs");

    #[test]
    fn runs() {
        run_example().unwrap();
    }
}

mod sparse_recovery {
    include!("../examples/sparse_recovery.rs");

    #[test]
    fn runs() {
        run_example().unwrap();
    }
}

mod synthesize_window {
    include!("../examples/synthesize_window.rs");

    #[test]
    fn runs() {
        run_example().unwrap();
    }
}
