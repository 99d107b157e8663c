use big2::gamelog::{GameLog, GameLogError};
use big2_core::env::Table;
use big2_core::policy::{Decision, Policy, RandomUniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_game(seed: u64) -> Table {
    let mut table = Table::deal(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
    while !table.is_done() {
        let mut d = [Decision {
            table: &table,
            mask: table.legal_mask(),
            rng: &mut rng,
        }];
        let a = RandomUniform.act(&mut d).unwrap()[0];
        table.step(a).unwrap();
    }
    table
}

#[test]
fn logs_round_trip_and_replay() {
    for seed in 0..50 {
        let table = random_game(seed);
        let log = GameLog::from_state(table.state());
        let text = log.to_text();
        assert!(text.starts_with(&format!("# big2 game seed={seed}\n")));
        assert_eq!(text.lines().count(), log.moves.len() + 2);
        let parsed = GameLog::parse(&text).unwrap();
        assert_eq!(parsed, log);
        assert_eq!(&parsed.replay().unwrap(), table.state());
    }
}

#[test]
fn log_lines_have_seat_action_and_cards() {
    let log = GameLog::from_state(random_game(3).state());
    let text = log.to_text();
    let first = text.lines().nth(1).unwrap();
    let fields: Vec<&str> = first.split(' ').collect();
    assert_eq!(fields[0], "1");
    // The opening move is the single three of diamonds.
    assert_eq!(fields[2], "0");
    assert_eq!(fields[3], "3D");
    assert!(text.lines().any(|l| l.ends_with(" PASS")));
}

#[test]
fn tampered_logs_fail_to_replay() {
    let log = GameLog::from_state(random_game(8).state());
    let text = log.to_text();

    let wrong_seed = text.replacen("seed=8", "seed=9", 1);
    assert!(matches!(GameLog::parse(&wrong_seed).unwrap().replay(), Err(GameLogError::Mismatch { .. })));

    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[1] = lines[1].replace("3D", "3C");
    assert!(matches!(GameLog::parse(&lines.join("\n")).unwrap().replay(), Err(GameLogError::Mismatch { .. })));

    assert!(matches!(GameLog::parse("1 0 0 3D\n"), Err(GameLogError::MissingHeader)));
    assert!(matches!(GameLog::parse("# big2 game seed=1\n1 0 x 3D\n"), Err(GameLogError::Parse { line: 2, .. })));
}
