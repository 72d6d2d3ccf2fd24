use costly_demo::{Session, Task};

#[test]
fn tasks_parse_by_name() {
    assert_eq!(Task::parse("redundant"), Some(Task::RedundantPair));
    assert_eq!(Task::parse("single"), Some(Task::SingleInformative));
    assert_eq!(Task::parse("overlapping"), Some(Task::Overlapping));
    assert_eq!(Task::parse("wine"), None);
}

#[test]
fn training_extends_the_curve() {
    let mut s = Session::new(Task::SingleInformative, 0.05, 3).unwrap();
    let first = s.train(3).unwrap();
    assert_eq!(first.curve.len(), 3);
    let second = s.train(2).unwrap();
    assert_eq!(second.epochs_done, 5);
    let epochs: Vec<usize> = second.curve.iter().map(|p| p.epoch).collect();
    assert_eq!(epochs, vec![1, 2, 3, 4, 5]);
    assert_eq!(second.acquisition_rate.len(), 3);
    assert!(second.acquisition_rate.iter().all(|&r| (0.0..=1.0).contains(&r)));
    assert_eq!(second.costs, vec![0.1, 0.5, 0.8]);
}

#[test]
fn search_view_lists_every_root() {
    let mut s = Session::new(Task::RedundantPair, 0.1, 1).unwrap();
    s.train(2).unwrap();
    let view = s.search(0, 30, 1.5).unwrap();
    assert!(!view.steps.is_empty());
    for step in &view.steps {
        assert_eq!(step.actions.len(), 5);
        assert!(step.visits.iter().sum::<u32>() >= 1);
        assert!((step.priors.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
    assert!(view.steps.last().unwrap().chosen.starts_with("classify"));
    assert_eq!(view.steps[0].acquired.len(), 0);
    assert!(s.search(s.val_rows(), 30, 1.5).is_err());
    assert!(s.search(0, 0, 1.5).is_err());
}

#[test]
fn rules_view_matches_the_dot_export() {
    let s = Session::new(Task::SingleInformative, 0.05, 2).unwrap();
    let view = s.rules(10, 1).unwrap();
    assert!(!view.lines.is_empty());
    assert_eq!(view.lines[0].depth, 0);
    assert!(view.lines[0].condition.is_none());
    assert_eq!(view.dot.matches(" [label=").count() - view.dot.matches(" -> ").count(), view.lines.len());
    let empty = s.rules(10, 1_000_000).unwrap();
    assert!(empty.lines.is_empty() && empty.warning.is_some());
}

#[test]
fn sessions_are_reproducible() {
    let run = || {
        let mut s = Session::new(Task::Overlapping, 0.1, 9).unwrap();
        serde_json::to_string(&s.train(2).unwrap()).unwrap()
    };
    assert_eq!(run(), run());
}
