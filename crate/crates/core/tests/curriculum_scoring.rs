use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use planbench_core::blocksworld::{legal_state, BlocksworldInstanceSpec};
use planbench_core::curriculum::{make_instance, CurriculumConfig, DisguiseChoice, TaskKind};
use planbench_core::pddl::{goal_satisfied, GoalKind};
use planbench_core::planner::{solve_satisficing, Budget};
use planbench_core::scoring::{corrupted_completion, reference_completion, score_completion, Verdict};

fn spec(i: u64) -> BlocksworldInstanceSpec {
    BlocksworldInstanceSpec {
        num_blocks: 3 + (i % 3) as usize,
        goal_kind: if i % 2 == 0 { GoalKind::Full } else { GoalKind::Partial },
        seed: 1000 + i,
    }
}

#[test]
fn ground_truth_scores_correct_and_corruption_incorrect() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for disguise in [DisguiseChoice::None, DisguiseChoice::Random] {
        let cfg = CurriculumConfig {
            disguise,
            ..Default::default()
        };
        for task in TaskKind::ALL {
            for i in 0..10 {
                let inst = make_instance(task, &spec(i), &cfg).unwrap();
                let good = reference_completion(&inst).unwrap();
                assert_eq!(score_completion(&inst, &good).verdict, Verdict::Correct, "{}", inst.id);
                let bad = corrupted_completion(&inst, &mut rng).unwrap();
                assert_eq!(score_completion(&inst, &bad).verdict, Verdict::Incorrect, "{}", inst.id);
                let tagless = good.replace("[PLAN END]", "").replace("[ANSWER END]", "");
                assert_eq!(score_completion(&inst, &tagless).verdict, Verdict::Ignored, "{}", inst.id);
            }
        }
    }
}

#[test]
fn replanning_states_stay_legal_and_solvable() {
    let d = planbench_core::blocksworld::blocksworld_domain();
    for i in 0..60 {
        let inst = make_instance(TaskKind::Replanning, &spec(i), &CurriculumConfig::default()).unwrap();
        let p = inst.payload.parse_problem(&d).unwrap();
        assert!(legal_state(&p.init, &p.objects));
        assert!(!goal_satisfied(&p.init, &p.goal));
        assert!(solve_satisficing(&d, &p, Budget::default()).is_ok());
    }
}

#[test]
fn instances_serialize_and_reload() {
    for task in TaskKind::ALL {
        let inst = make_instance(task, &spec(3), &CurriculumConfig::default()).unwrap();
        let line = serde_json::to_string(&inst).unwrap();
        let back: planbench_core::curriculum::TestInstance = serde_json::from_str(&line).unwrap();
        assert_eq!(back, inst);
        let good = reference_completion(&back).unwrap();
        assert_eq!(score_completion(&back, &good).verdict, Verdict::Correct);
    }
}
