// Every example runs end to end with small inputs.

#[allow(dead_code)]
mod synth_scene {
    include!("../examples/synth_scene.rs");

    #[test]
    fn runs() {
        let dir = tempfile::tempdir().unwrap();
        run_example(dir.path().to_path_buf()).unwrap();
        assert!(dir.path().join("demo/overlay_0.png").exists());
        assert!(dir.path().join("demo/groundtruth.txt").exists());
    }
}

#[allow(dead_code)]
mod metric_iou {
    include!("../examples/metric_iou.rs");

    #[test]
    fn runs() {
        run_example().unwrap();
    }
}

#[allow(dead_code)]
mod controller_oracle {
    include!("../examples/controller_oracle.rs");

    #[test]
    fn runs() {
        run_example().unwrap();
    }
}

#[allow(dead_code)]
mod gradient_check {
    include!("../examples/gradient_check.rs");

    #[test]
    fn runs() {
        assert!(run_example(2).unwrap());
    }
}

#[allow(dead_code)]
mod train_extractor {
    include!("../examples/train_extractor.rs");

    #[test]
    fn runs() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("m.roix");
        let history = run_example(2, 2, &out).unwrap();
        assert_eq!(history.len(), 2);
        assert!(out.exists());
    }
}

#[allow(dead_code)]
mod track_sequence {
    include!("../examples/track_sequence.rs");

    #[test]
    fn runs() {
        run_example(None).unwrap();
    }
}

#[allow(dead_code)]
mod template_sweep {
    include!("../examples/template_sweep.rs");

    #[test]
    fn runs() {
        let dir = tempfile::tempdir().unwrap();
        let rows = run_example(None, dir.path()).unwrap();
        assert_eq!(rows.len(), 4);
    }
}
