use std::fs;
use std::path::PathBuf;
use std::time::Duration;

use wcfg::cp::{solve_min, Backend, SolveOptions, Status};
use wcfg::oracle::exhaustive_min_cost;
use wcfg::schedule::{build_schedule_model, ScheduleInstance, ShiftRestrictions};

fn desk() -> Vec<(String, ScheduleInstance)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/desk");
    let mut files: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    files
        .into_iter()
        .map(|f| {
            let name = f.file_stem().unwrap().to_string_lossy().into_owned();
            (name, ScheduleInstance::parse(&fs::read_to_string(&f).unwrap()).unwrap())
        })
        .collect()
}

#[test]
fn desk_instances_round_trip() {
    let all = desk();
    assert_eq!(all.len(), 10);
    for (name, inst) in all {
        assert!(inst.m <= 2 && inst.n <= 16 && inst.activities.len() <= 2, "{name}");
        assert_eq!(ScheduleInstance::parse(&inst.to_file_string()).unwrap(), inst, "{name}");
    }
}

#[test]
fn desk_optimum_on_every_backend() {
    let options = SolveOptions { time_limit: Some(Duration::from_secs(60)) };
    for (name, inst) in desk() {
        let expected = exhaustive_min_cost(&build_schedule_model(&inst, Backend::Monolithic).unwrap().model).unwrap();
        for b in Backend::ALL {
            let log = solve_min(&build_schedule_model(&inst, b).unwrap().model, &options);
            assert_ne!(log.status, Status::TimeLimit, "{name} {b}");
            assert_eq!(log.cost(), expected, "{name} {b}");
        }
    }
}

#[test]
fn full_day_single_employee() {
    // 96 slots, reference restrictions: the cheapest shift is a part-time
    // one of 13 slots with one break, so 12 activity slots.
    let inst = ScheduleInstance {
        n: 96,
        m: 1,
        activities: vec!["a".into()],
        open: vec![true; 96],
        demand: vec![vec![0; 96]],
        time_limit: 60.0,
        restrictions: ShiftRestrictions::REFERENCE,
    };
    let sm = build_schedule_model(&inst, Backend::Monolithic).unwrap();
    let log = solve_min(&sm.model, &SolveOptions { time_limit: Some(Duration::from_secs(60)) });
    assert_eq!(log.status, Status::Optimal);
    assert_eq!(log.cost(), Some(12));
    let row = &log.best.unwrap().rows[0];
    let names: String = row.iter().map(|&t| sm.grammar.symbols.terminal_name(t).chars().next().unwrap()).collect();
    assert!(names.starts_with('r') && names.ends_with('r'), "{names}");
    assert_eq!(names.matches('a').count(), 12);
    assert_eq!(names.matches('b').count(), 1);
}
