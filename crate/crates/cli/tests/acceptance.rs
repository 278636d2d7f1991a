//! Acceptance gate: every headline property of the toolkit, each reported
//! on one PASS/FAIL line. Exits nonzero when any check fails.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use nalgebra::{Matrix4, Quaternion as NQ, Translation3, UnitQuaternion};
use rigmotion_client::api::{FramesQuery, GenerateRequest};
use rigmotion_client::Client;
use rigmotion_core::animstring::{compress, estimate_tokens, quantize_clip, reconstruction_error};
use rigmotion_core::control::{parse_controller, simulate, KeyInput, SplitMix64, Trigger};
use rigmotion_core::kinematics::{LocalTransform, Pose};
use rigmotion_core::llm_bridge::{
    generate_animation, ChatRequest, LlmConfig, OfflineTransport, ReplayTransport, Transport, TransportError,
};
use rigmotion_core::promptkit::{Demonstration, MetapromptSpec, PromptMode, TemplateSet};
use rigmotion_core::{
    forward_kinematics, parse_animstring, parse_object_json, serialize_animstring, to_clip, validate_against, Clip,
    Joint, QuantizeSpec, Quaternion, Skeleton, Vec3,
};

type Check = fn() -> Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn main() {
    let checks: [(&str, Check); 10] = [
        ("grammar round-trip", grammar_round_trip),
        ("parser totality fuzz", parser_fuzz),
        ("slerp oracle", slerp_oracle),
        ("forward kinematics oracle", fk_oracle),
        ("compression efficacy", compression_efficacy),
        ("quantization rule", quantization_rule),
        ("offline end-to-end generation", offline_end_to_end),
        ("semantic targeting", semantic_targeting),
        ("controller determinism", controller_determinism),
        ("service round-trip", service_round_trip),
    ];
    let suite = Instant::now();
    let mut failures = 0;
    for (name, check) in checks {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let elapsed = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{elapsed:.2}s]"),
            Err(why) => {
                failures += 1;
                println!("FAIL  {name}: {why} [{elapsed:.2}s]");
            }
        }
    }
    let total = suite.elapsed();
    if total < Duration::from_secs(120) {
        println!("PASS  suite runtime: {:.1}s under 120s", total.as_secs_f64());
    } else {
        failures += 1;
        println!("FAIL  suite runtime: {:.1}s exceeds 120s", total.as_secs_f64());
    }
    println!("{} failure(s)", failures);
    if failures > 0 {
        std::process::exit(1);
    }
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixtures().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn fixture_clip(name: &str) -> Clip {
    to_clip(&parse_animstring(&fixture(name)).unwrap()).unwrap()
}

fn fixture_skeleton(name: &str) -> Skeleton {
    parse_object_json(&fixture(name)).unwrap()
}

fn uniform(rng: &mut SplitMix64, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.next_f64()
}

fn below(rng: &mut SplitMix64, n: usize) -> usize {
    (rng.next_u64() % n as u64) as usize
}

fn unit_quat(rng: &mut SplitMix64) -> Quaternion {
    loop {
        let q = Quaternion::new(
            uniform(rng, -1.0, 1.0),
            uniform(rng, -1.0, 1.0),
            uniform(rng, -1.0, 1.0),
            uniform(rng, -1.0, 1.0),
        );
        if q.norm() > 0.1 {
            return q.normalized().unwrap();
        }
    }
}

fn vec3(rng: &mut SplitMix64, r: f64) -> Vec3 {
    Vec3::new(uniform(rng, -r, r), uniform(rng, -r, r), uniform(rng, -r, r))
}

fn random_clip(rng: &mut SplitMix64) -> Clip {
    let duration = uniform(rng, 0.5, 10.0);
    let mut c = Clip::new("random motion", duration);
    for j in 0..1 + below(rng, 8) {
        let mut keys: Vec<(f64, Quaternion)> =
            (0..1 + below(rng, 20)).map(|_| (rng.next_f64() * duration, unit_quat(rng))).collect();
        keys.sort_by(|a, b| a.0.total_cmp(&b.0));
        c = c.with_track(format!("joint_{j}"), keys);
    }
    if rng.next_u64().is_multiple_of(2) {
        let mut keys: Vec<(f64, Vec3)> =
            (0..1 + below(rng, 20)).map(|_| (rng.next_f64() * duration, vec3(rng, 5.0))).collect();
        keys.sort_by(|a, b| a.0.total_cmp(&b.0));
        c = c.with_root_motion(keys);
    }
    c
}

fn random_spec(rng: &mut SplitMix64) -> QuantizeSpec {
    let digits = 1 + below(rng, 6) as u32;
    match below(rng, 4) {
        0 => QuantizeSpec::LLM_EXCHANGE,
        1 => QuantizeSpec::ARCHIVAL,
        2 => QuantizeSpec::significant_figures(digits),
        _ => QuantizeSpec::decimal_places(digits),
    }
}

fn same_clip(expected: &Clip, got: &Clip) -> Result<(), String> {
    ensure!(expected.name == got.name, "name {:?} vs {:?}", expected.name, got.name);
    ensure!((expected.duration - got.duration).abs() < 1e-12, "duration {} vs {}", expected.duration, got.duration);
    ensure!(expected.rotation_tracks.len() == got.rotation_tracks.len(), "track count differs");
    for (a, b) in expected.rotation_tracks.iter().zip(&got.rotation_tracks) {
        ensure!(a.joint_name == b.joint_name, "joint {} vs {}", a.joint_name, b.joint_name);
        ensure!(a.keys.len() == b.keys.len(), "{}: key count differs", a.joint_name);
        for (ka, kb) in a.keys.iter().zip(&b.keys) {
            ensure!((ka.time - kb.time).abs() < 1e-12, "{}: time {} vs {}", a.joint_name, ka.time, kb.time);
            let dot = ka.rotation.dot(kb.rotation).abs();
            ensure!(dot >= 1.0 - 1e-6, "{} at {}: |dot| {dot}", a.joint_name, ka.time);
        }
    }
    ensure!(expected.root_motion.is_some() == got.root_motion.is_some(), "root motion presence differs");
    let (ra, rb) = (expected.root_motion.iter().flatten(), got.root_motion.iter().flatten());
    for (ka, kb) in ra.zip(rb) {
        ensure!((ka.time - kb.time).abs() < 1e-12, "root time {} vs {}", ka.time, kb.time);
        ensure!((ka.translation - kb.translation).length() < 1e-9, "root translation at {}", ka.time);
    }
    Ok(())
}

fn grammar_round_trip() -> Result<String, String> {
    let mut rng = SplitMix64::new(0x5eed_0001);
    let start = Instant::now();
    let mut keys = 0;
    for case in 0..1000 {
        let c = random_clip(&mut rng);
        let q = random_spec(&mut rng);
        let text = serialize_animstring(&c, &q);
        let parsed = parse_animstring(&text).map_err(|e| format!("case {case}: {e}"))?;
        let parsed = to_clip(&parsed).map_err(|e| format!("case {case}: {e}"))?;
        let expected = quantize_clip(&c, &q).map_err(|e| format!("case {case}: {e}"))?;
        same_clip(&expected, &parsed).map_err(|e| format!("case {case} ({q:?}): {e}"))?;
        keys += parsed.key_count();
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!("1000 clips, {keys} keys, 0 failures in {:.2}s", elapsed.as_secs_f64()))
}

const SNIPPETS: [&str; 16] = [
    "(", ")", ",", "\n", "END", "JOINT ", "ROOT", "DURATION ", "ANIMATION ", "```", "-", "1e309", "NaN", ".", "é", "\0",
];

fn mutate(seed: &str, rng: &mut SplitMix64) -> String {
    let mut chars: Vec<char> = seed.chars().collect();
    for _ in 0..1 + below(rng, 8) {
        let pos = below(rng, chars.len() + 1);
        match below(rng, 5) {
            0 if pos < chars.len() => {
                chars.remove(pos);
            }
            1 => {
                for (k, ch) in SNIPPETS[below(rng, SNIPPETS.len())].chars().enumerate() {
                    chars.insert(pos + k, ch);
                }
            }
            2 if pos < chars.len() => chars[pos] = char::from_u32(below(rng, 128) as u32).unwrap_or('?'),
            3 if !chars.is_empty() => {
                let end = (pos + below(rng, 40)).min(chars.len());
                let piece: Vec<char> = chars[pos.min(end)..end].to_vec();
                for (k, ch) in piece.into_iter().enumerate() {
                    chars.insert(end + k, ch);
                }
            }
            _ => chars.truncate(pos),
        }
    }
    chars.into_iter().collect()
}

fn parser_fuzz() -> Result<String, String> {
    let seeds = [
        fixture("whale_swim.anim.txt"),
        fixture("flap.anim.txt"),
        fixture("lamp_hop.anim.txt"),
        fixture("replay/garbage_then_valid/1.txt"),
        fixture("tail_wag_60.anim.txt"),
    ];
    let mut rng = SplitMix64::new(0x5eed_0002);
    let (mut valid, mut typed) = (0, 0);
    let mut slowest = Duration::ZERO;
    for i in 0..10_000 {
        let input = mutate(&seeds[i % seeds.len()], &mut rng);
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(|| parse_animstring(&input).map(|d| to_clip(&d).is_ok())));
        let elapsed = start.elapsed();
        slowest = slowest.max(elapsed);
        ensure!(elapsed < Duration::from_millis(100), "input {i} took {elapsed:?}: {input:?}");
        match outcome {
            Ok(Ok(_)) => valid += 1,
            Ok(Err(e)) => {
                ensure!(!e.code().is_empty() && !e.to_string().is_empty(), "untyped error on {input:?}");
                typed += 1;
            }
            Err(_) => return Err(format!("crash on input {i}: {input:?}")),
        }
    }
    Ok(format!("10000 inputs: {valid} parsed, {typed} typed errors, 0 crashes, slowest {slowest:?}"))
}

fn to_na(q: Quaternion) -> UnitQuaternion<f64> {
    UnitQuaternion::from_quaternion(NQ::new(q.w, q.x, q.y, q.z))
}

fn axis_angle_oracle(a: Quaternion, b: Quaternion, s: f64) -> Quaternion {
    let (na, nb) = (to_na(a), to_na(b));
    let mut rel = na.inverse() * nb;
    if rel.w < 0.0 {
        rel = UnitQuaternion::new_unchecked(-rel.into_inner());
    }
    match rel.axis_angle() {
        Some((axis, angle)) => {
            let q = na * UnitQuaternion::from_axis_angle(&axis, s * angle);
            Quaternion::new(q.i, q.j, q.k, q.w)
        }
        None => a,
    }
}

fn slerp_oracle() -> Result<String, String> {
    let mut rng = SplitMix64::new(0x5eed_0003);
    let mut worst: f64 = 0.0;
    for pair in 0..1000 {
        let (a, b) = (unit_quat(&mut rng), unit_quat(&mut rng));
        for i in 1..=11 {
            let s = i as f64 / 12.0;
            let err = a.slerp(b, s).angle_to(axis_angle_oracle(a, b, s));
            worst = worst.max(err);
            ensure!(err <= 1e-6, "pair {pair} at s={s}: geodesic error {err:e}");
        }
    }
    let z = Vec3::new(0.0, 0.0, 1.0);
    let mid = Quaternion::IDENTITY.slerp(Quaternion::from_axis_angle(z, std::f64::consts::FRAC_PI_2), 0.5);
    let mid_err = mid.angle_to(Quaternion::from_axis_angle(z, std::f64::consts::FRAC_PI_4));
    ensure!(mid_err <= 1e-12, "identity to 90deg z midpoint off by {mid_err:e}");
    Ok(format!("11000 samples, worst {worst:.1e} rad; 45deg midpoint exact"))
}

fn fk_oracle() -> Result<String, String> {
    let mut rng = SplitMix64::new(0x5eed_0004);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let n = 1 + below(&mut rng, 8);
        let parents: Vec<Option<usize>> = (0..n).map(|i| if i == 0 { None } else { Some(below(&mut rng, i)) }).collect();
        let rest: Vec<(Vec3, Quaternion)> = (0..n).map(|_| (vec3(&mut rng, 2.0), unit_quat(&mut rng))).collect();
        let pose_in: Vec<(Vec3, Quaternion)> = (0..n).map(|_| (vec3(&mut rng, 2.0), unit_quat(&mut rng))).collect();

        fn node(i: usize, parents: &[Option<usize>], rest: &[(Vec3, Quaternion)]) -> Joint {
            let mut j = Joint::new(format!("j{i}")).with_translation(rest[i].0).with_rotation(rest[i].1);
            for c in (0..parents.len()).filter(|&c| parents[c] == Some(i)) {
                j = j.with_child(node(c, parents, rest));
            }
            j
        }
        let skeleton = Skeleton::new("Oracle", node(0, &parents, &rest)).map_err(|e| e.to_string())?;
        let mut pose = Pose::new();
        for (i, (t, r)) in pose_in.iter().enumerate() {
            pose.insert(format!("j{i}"), LocalTransform { rotation: *r, translation: *t });
        }
        let world = forward_kinematics(&skeleton, &pose).map_err(|e| e.to_string())?;

        let mut mats: Vec<Matrix4<f64>> = Vec::with_capacity(n);
        for i in 0..n {
            let offset = rest[i].0 + pose_in[i].0;
            let local = Translation3::new(offset.x, offset.y, offset.z).to_homogeneous() * to_na(pose_in[i].1).to_homogeneous();
            let m = parents[i].map_or(local, |p| mats[p] * local);
            mats.push(m);
            let w = &world[&format!("j{i}")];
            let r = to_na(w.rotation).to_homogeneous();
            let p = w.position.to_array();
            for row in 0..3 {
                worst = worst.max((m[(row, 3)] - p[row]).abs());
                for col in 0..3 {
                    worst = worst.max((m[(row, col)] - r[(row, col)]).abs());
                }
            }
            ensure!(worst <= 1e-5, "case {case}, joint j{i}: deviation {worst:e}");
        }
    }
    Ok(format!("100 skeletons, worst coordinate deviation {worst:.1e}"))
}

fn compression_efficacy() -> Result<String, String> {
    let original = fixture_clip("tail_wag_60.anim.txt");
    ensure!(original.key_count() == 60, "fixture has {} keys", original.key_count());
    let reduced = compress(&original, 0.01);
    let kept = reduced.key_count();
    ensure!(kept <= 15, "{kept} keys kept");
    let err = reconstruction_error(&original, &reduced);
    ensure!(err <= 0.02, "reconstruction error {err}");
    let mut ratios = Vec::new();
    for q in [QuantizeSpec::LLM_EXCHANGE, QuantizeSpec::ARCHIVAL] {
        let before = estimate_tokens(&serialize_animstring(&original, &q));
        let after = estimate_tokens(&serialize_animstring(&reduced, &q));
        ensure!(after * 2 <= before, "{q:?}: {before} -> {after} tokens");
        ratios.push(format!("{before}->{after}"));
    }
    Ok(format!("60 -> {kept} keys, max error {err:.4} rad, tokens {}", ratios.join(" / ")))
}

#[allow(clippy::approx_constant)]
fn quantization_rule() -> Result<String, String> {
    let sig1 = QuantizeSpec::significant_figures(1);
    let sig2 = QuantizeSpec::significant_figures(2);
    let dp2 = QuantizeSpec::decimal_places(2);
    let dp4 = QuantizeSpec::ARCHIVAL;
    let table: [(QuantizeSpec, f64, &str); 20] = [
        (sig1, 0.1234, "0.1"),
        (sig1, 0.04678, "0.05"),
        (sig1, 0.15, "0.2"),
        (sig1, -0.15, "-0.2"),
        (sig1, 0.95, "1"),
        (sig1, 0.9659, "1"),
        (sig1, -0.7071, "-0.7"),
        (sig1, 0.0, "0"),
        (sig1, 12.0, "10"),
        (sig1, 0.000449, "0.0004"),
        (sig2, 0.1234, "0.12"),
        (sig2, 0.995, "1"),
        (sig2, -0.04678, "-0.047"),
        (dp2, 0.125, "0.13"),
        (dp2, -0.125, "-0.13"),
        (dp2, 0.004, "0"),
        (dp2, 1.5, "1.5"),
        (dp4, 0.70710678, "0.7071"),
        (dp4, -0.00005, "-0.0001"),
        (dp4, 2.0, "2"),
    ];
    for (q, v, want) in table {
        let got = q.format(v);
        ensure!(got == want, "{v} with {q:?} gave {got}, expected {want}");
        ensure!(q.apply(v) == want.parse::<f64>().unwrap(), "{v} with {q:?} applied to {}", q.apply(v));
    }
    Ok("20/20 table values, 0.1234->0.1 and 0.04678->0.05".into())
}

/// Serves recorded replies; anything beyond them would have to go to a
/// transport that refuses all network access.
struct Guarded {
    replay: ReplayTransport,
    offline: OfflineTransport,
}

impl Guarded {
    fn new(dir: &str) -> Self {
        let replay = ReplayTransport::from_dir(&fixtures().join("replay").join(dir)).unwrap();
        Self { replay, offline: OfflineTransport::default() }
    }
}

impl Transport for Guarded {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        match self.replay.complete(request) {
            Err(TransportError::Exhausted { .. }) => self.offline.complete(request),
            other => other,
        }
    }
}

fn offline_end_to_end() -> Result<String, String> {
    let cfg = LlmConfig::default();
    let templates = TemplateSet::builtin();
    let whale = fixture_skeleton("whale.object.json");
    let lamp = fixture_skeleton("lamp.object.json");
    let swim = || vec![Demonstration::new("swimming", fixture("whale_swim.anim.txt"))];

    let runs = [
        ("whale few-shot", "whale_few_shot", PromptMode::FewShot, &whale, 1u32),
        ("lamp zero-shot", "lamp_zero_shot", PromptMode::ZeroShot, &lamp, 1),
        ("garbage then valid", "garbage_then_valid", PromptMode::FewShot, &whale, 2),
    ];
    let mut notes = Vec::new();
    for (label, dir, mode, skeleton, attempts) in runs {
        let t = Guarded::new(dir);
        let spec = MetapromptSpec::for_skeleton(mode, skeleton, swim(), "animate it");
        let r = generate_animation(&spec, skeleton, &cfg, &t, &templates).map_err(|e| format!("{label}: {e}"))?;
        ensure!(validate_against(&r.clip, skeleton).is_valid(), "{label}: returned clip does not validate");
        ensure!(r.attempts == attempts, "{label}: {} attempts", r.attempts);
        ensure!(r.repair_notes.len() as u32 == attempts - 1, "{label}: {} repair turns", r.repair_notes.len());
        ensure!(t.offline.attempts() == 0, "{label}: network transport was reached");
        if attempts == 2 {
            let second = &t.replay.requests()[1].messages;
            ensure!(second.len() == 3, "{label}: repair turn has {} messages", second.len());
        }
        notes.push(format!("{label} ok in {}", r.attempts));
    }
    Ok(format!("{}; no network access", notes.join(", ")))
}

fn semantic_targeting() -> Result<String, String> {
    let whale = fixture_skeleton("whale.object.json");
    let clip = fixture_clip("whale_head_tilt.anim.txt");
    let report = validate_against(&clip, &whale);
    ensure!(report.is_valid(), "head tilt does not validate: {:?}", report.error_messages());
    let head = vec!["Head".to_string()];
    let motion: Vec<String> = report.motion_joints.to_vec();
    let covered: Vec<String> = report.covered_joints.to_vec();
    ensure!(motion == head, "motion-bearing joints {motion:?}");
    ensure!(covered == head, "coverage report {covered:?}");
    Ok("valid; motion and coverage both exactly {Head}".into())
}

/// Expected long-run share of time per state for a program whose states
/// are left only through one random check each.
fn markov_oracle(text: &str) -> BTreeMap<String, f64> {
    let p = parse_controller(text).unwrap();
    let sojourn: BTreeMap<String, f64> = p
        .states
        .iter()
        .map(|s| {
            let t = p.transitions.iter().find(|t| t.from.matches(&s.name)).expect("exit transition");
            let Trigger::Random { probability, interval } = t.trigger else { panic!("random triggers only") };
            (s.name.clone(), interval / probability)
        })
        .collect();
    let total: f64 = sojourn.values().sum();
    sojourn.into_iter().map(|(k, v)| (k, v / total)).collect()
}

fn controller_determinism() -> Result<String, String> {
    let program = parse_controller(&fixture("idle_walk.ctrl.txt")).map_err(|e| e.to_string())?;
    let inputs: Vec<KeyInput> = serde_json::from_str(&fixture("idle_walk.inputs.json")).map_err(|e| e.to_string())?;
    let golden = fixture("golden/idle_walk.trace.json");
    for seed in [1u64, 987654321] {
        for run in 0..10 {
            let got = simulate(&program, &inputs, 10.0, seed).to_json();
            ensure!(got == golden, "seed {seed} run {run}: trace differs from golden");
        }
    }

    let text = fixture("random_walk.ctrl.txt");
    let oracle = markov_oracle(&text);
    let walk = parse_controller(&text).unwrap();
    let mut worst: f64 = 0.0;
    for seed in 0..100u64 {
        let occ = simulate(&walk, &[], 300.0, seed).occupancy();
        for (state, expected) in &oracle {
            let dev = (occ.get(state).copied().unwrap_or(0.0) - expected).abs();
            worst = worst.max(dev);
            ensure!(dev <= 0.15, "seed {seed} state {state}: deviation {dev:.3}");
        }
    }
    Ok(format!("golden trace byte-exact x20; 100 seeds within {worst:.3} of oracle {oracle:?}"))
}

struct Server {
    child: Child,
    url: String,
}

impl Server {
    fn start(store: &Path) -> Server {
        let mut child = Command::new(env!("CARGO_BIN_EXE_rigmotion"))
            .args(["serve", "--host", "127.0.0.1", "--port", "0", "--store"])
            .arg(store)
            .arg("--mock-dir")
            .arg(fixtures().join("replay/whale_few_shot"))
            .env_remove("RIGMOTION_CONFIG")
            .env_remove("RIGMOTION_ENDPOINT")
            .env("RUST_LOG", "warn")
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .expect("spawn rigmotion serve");
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let url = line.trim().strip_prefix("listening on ").expect("listening line").to_string();
        Server { child, url }
    }

    fn kill(mut self) {
        self.child.kill().unwrap();
        self.child.wait().unwrap();
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Frames expected on the `0, 1/fps, ...` grid, with the final frame
/// pinned to the duration.
fn grid_len(duration: f64, fps: f64) -> usize {
    let exact = duration * fps;
    let whole = exact.round();
    if (exact - whole).abs() < 1e-9 {
        whole as usize + 1
    } else {
        exact.ceil() as usize + 1
    }
}

fn service_round_trip() -> Result<String, String> {
    let store = tempfile::tempdir().map_err(|e| e.to_string())?;
    let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().map_err(|e| e.to_string())?;
    let first = Server::start(store.path());
    let client = Client::new(first.url.clone());
    let fps_grid = [30.0, 24.0, 4.0, 3.0, 7.0];

    let (skeleton_id, session_id, clip_id, before) = rt.block_on(async {
        let skeleton_id = client.post_skeleton(&fixture("whale.object.json")).await?.skeleton_id;
        let session_id = client.create_session(&skeleton_id, None).await?.session_id;
        let req = GenerateRequest {
            request: "swim forward".into(),
            mode: PromptMode::FewShot,
            demonstrations: Some(vec![Demonstration::new("swimming", fixture("whale_swim.anim.txt"))]),
        };
        let generated = client.generate(&session_id, &req).await?;
        let clip = client.get_clip(&generated.clip_id).await?;
        let mut counts = Vec::new();
        for fps in fps_grid {
            let q = FramesQuery { skeleton: skeleton_id.clone(), fps: Some(fps), edge: None };
            counts.push((fps, clip.duration, client.frames(&generated.clip_id, &q).await?.len()));
        }
        let reads = reads(&client, &skeleton_id, &session_id, &generated.clip_id).await?;
        Ok::<_, rigmotion_client::ClientError>((skeleton_id, session_id, generated.clip_id, (counts, reads)))
    })
    .map_err(|e| format!("first server: {e}"))?;
    let (counts, first_reads) = before;
    for (fps, duration, got) in &counts {
        let want = grid_len(*duration, *fps);
        ensure!(*got == want, "fps {fps}, duration {duration}: {got} frames, expected {want}");
    }
    first.kill();

    let second = Server::start(store.path());
    let client = Client::new(second.url.clone());
    let after = rt
        .block_on(reads(&client, &skeleton_id, &session_id, &clip_id))
        .map_err(|e| format!("after restart: {e}"))?;
    ensure!(after == first_reads, "reads differ after kill and restart");
    second.kill();
    let summary: Vec<String> = counts.iter().map(|(fps, _, n)| format!("{fps}fps:{n}")).collect();
    Ok(format!("frames {}; identical reads after kill -9 and restart", summary.join(" ")))
}

async fn reads(client: &Client, skeleton: &str, session: &str, clip: &str) -> Result<Vec<String>, rigmotion_client::ClientError> {
    let q = FramesQuery { skeleton: skeleton.into(), fps: Some(30.0), edge: None };
    Ok(vec![
        client.get_skeleton_raw(skeleton).await?,
        serde_json::to_string(&client.get_session(session).await?).unwrap(),
        client.get_clip_raw(clip).await?,
        serde_json::to_string(&client.frames(clip, &q).await?).unwrap(),
    ])
}
