use collabsgd::aggregators::{oracle_bc_combine, wga_combine};
use collabsgd::{CollaborationWeights, GradientSample, NoiseStream, QuadraticTask, StreamId};

const DRAWS: u64 = 100_000;

struct Moments {
    n: f64,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn new() -> Self {
        Self { n: 0.0, sum: 0.0, sum_sq: 0.0 }
    }
    fn push(&mut self, v: f64) {
        self.n += 1.0;
        self.sum += v;
        self.sum_sq += v * v;
    }
    fn mean(&self) -> f64 {
        self.sum / self.n
    }
    fn var(&self) -> f64 {
        (self.sum_sq - self.sum * self.sum / self.n) / (self.n - 1.0)
    }
    fn se(&self) -> f64 {
        (self.var() / self.n).sqrt()
    }
}

fn sample(task: &QuadraticTask<f64>, x: &[f64], agent: usize, stream: &mut NoiseStream, t: u64) -> GradientSample<f64> {
    task.sample_gradient(x, agent, stream.at(t)).unwrap()
}

#[test]
fn gradient_sample_mean_within_clt_band() {
    let task = QuadraticTask::scalar(2.0, 1.0, 10.0).unwrap();
    let mut s = NoiseStream::new(7, StreamId::Agent(0), 1);
    let mut m = Moments::new();
    for t in 0..DRAWS {
        m.push(sample(&task, &[3.0], 0, &mut s, t).value[0]);
    }
    let band = 3.0 * 10.0 / (DRAWS as f64).sqrt();
    assert!((m.mean() - 4.0).abs() < band, "mean {}", m.mean());
}

#[test]
fn gradient_sample_relative_noise_variance() {
    // grad = 2 at x = 2, so ||grad||^2 = 4 and the variance is 1 + 4
    let task = QuadraticTask::scalar(1.0, 0.0, 1.0).unwrap().with_noise_scale(1.0).unwrap();
    let mut s = NoiseStream::new(8, StreamId::Agent(0), 1);
    let mut m = Moments::new();
    for t in 0..DRAWS {
        m.push(sample(&task, &[2.0], 0, &mut s, t).value[0]);
    }
    assert!((m.var() / 5.0 - 1.0).abs() < 0.1, "var {}", m.var());
    assert!((m.mean() - 2.0).abs() < 3.0 * m.se());
}

#[test]
fn gradient_sample_multi_dim_variance_split() {
    // per-coordinate variance sigma^2 + M ||grad||^2 / d = 4 + 2 * 18 / 2 = 22
    let task = QuadraticTask::new(vec![1.0, 3.0], vec![0.0, 0.0], 2.0).unwrap().with_noise_scale(2.0).unwrap();
    let x = [3.0, 1.0];
    let grad = task.true_gradient(&x).unwrap();
    let mut s = NoiseStream::new(9, StreamId::Agent(0), 2);
    let mut m = [Moments::new(), Moments::new()];
    for t in 0..DRAWS {
        let g = sample(&task, &x, 0, &mut s, t);
        for (md, &v) in m.iter_mut().zip(&g.value) {
            md.push(v);
        }
    }
    for d in 0..2 {
        assert!((m[d].mean() - grad[d]).abs() < 3.0 * m[d].se());
        assert!((m[d].var() / 22.0 - 1.0).abs() < 0.1, "var {}", m[d].var());
    }
}

struct Setup {
    main: QuadraticTask<f64>,
    collabs: Vec<QuadraticTask<f64>>,
    w: CollaborationWeights<f64>,
    x: Vec<f64>,
}

fn setup() -> Setup {
    Setup {
        main: QuadraticTask::scalar(1.0, 0.0, 3.0).unwrap(),
        collabs: vec![
            QuadraticTask::scalar(2.0, 2.0, 1.0).unwrap(),
            QuadraticTask::scalar(0.5, -1.0, 2.0).unwrap(),
        ],
        w: CollaborationWeights::new(0.4, vec![0.3, 0.7], 1.0).unwrap(),
        x: vec![1.5],
    }
}

fn draw_all(s: &Setup, streams: &mut [NoiseStream], t: u64) -> (GradientSample<f64>, Vec<GradientSample<f64>>) {
    let g0 = sample(&s.main, &s.x, 0, &mut streams[0], t);
    let gks = s
        .collabs
        .iter()
        .enumerate()
        .map(|(k, c)| sample(c, &s.x, k + 1, &mut streams[k + 1], t))
        .collect();
    (g0, gks)
}

#[test]
fn wga_mean_and_variance() {
    let s = setup();
    let mut streams: Vec<_> = (0..3).map(|k| NoiseStream::new(21, StreamId::Agent(k), 1)).collect();
    let mut m = Moments::new();
    for t in 0..DRAWS {
        let (g0, gks) = draw_all(&s, &mut streams, t);
        m.push(wga_combine(&g0, &gks, &s.w).unwrap()[0]);
    }
    let a = s.w.alpha;
    let grad = |task: &QuadraticTask<f64>| task.true_gradient(&s.x).unwrap()[0];
    let target = (1.0 - a) * grad(&s.main) + a * (0.3 * grad(&s.collabs[0]) + 0.7 * grad(&s.collabs[1]));
    assert!((m.mean() - target).abs() < 3.0 * m.se(), "mean {} target {}", m.mean(), target);
    let var = (1.0 - a).powi(2) * 9.0 + a * a * (0.09 * 1.0 + 0.49 * 4.0);
    assert!((m.var() / var - 1.0).abs() < 0.1, "var {} expected {}", m.var(), var);
}

#[test]
fn oracle_bc_unbiased_with_predicted_variance() {
    let s = setup();
    let v = 1.5;
    let mut streams: Vec<_> = (0..3).map(|k| NoiseStream::new(22, StreamId::Agent(k), 1)).collect();
    let mut oracle = NoiseStream::new(22, StreamId::Oracle, 1);
    let grad = |task: &QuadraticTask<f64>| task.true_gradient(&s.x).unwrap()[0];
    let bias = 0.3 * grad(&s.collabs[0]) + 0.7 * grad(&s.collabs[1]) - grad(&s.main);
    let mut m = Moments::new();
    for t in 0..DRAWS {
        let (g0, gks) = draw_all(&s, &mut streams, t);
        m.push(oracle_bc_combine(&g0, &gks, &s.w, &[bias], oracle.at(t), v).unwrap()[0]);
    }
    let a = s.w.alpha;
    assert!((m.mean() - grad(&s.main)).abs() < 3.0 * m.se());
    let sigma_a_sq = 0.09 * 1.0 + 0.49 * 4.0;
    let var = (1.0 - a).powi(2) * 9.0 + a * a * (sigma_a_sq + v * v / 2.0);
    assert!((m.var() / var - 1.0).abs() < 0.1, "var {} expected {}", m.var(), var);
}

#[test]
fn combiners_are_linear() {
    use collabsgd::aggregators::bc_combine;
    use collabsgd::BcState;
    let w = CollaborationWeights::new(0.35, vec![0.2, 0.8], 0.5).unwrap();
    let mk = |v: [f64; 2]| GradientSample::new(v.to_vec(), 0);
    let (u0, u1, u2) = (mk([1.0, -2.0]), mk([0.5, 4.0]), mk([3.0, 1.0]));
    let (v0, v1, v2) = (mk([-1.5, 0.25]), mk([2.0, 2.0]), mk([-4.0, 0.5]));
    let add = |a: &GradientSample<f64>, b: &GradientSample<f64>, k: f64| {
        GradientSample::new(a.value.iter().zip(&b.value).map(|(x, y)| x + k * y).collect(), 0)
    };
    let k = 2.5;
    let wu = wga_combine(&u0, &[u1.clone(), u2.clone()], &w).unwrap();
    let wv = wga_combine(&v0, &[v1.clone(), v2.clone()], &w).unwrap();
    let wsum = wga_combine(&add(&u0, &v0, k), &[add(&u1, &v1, k), add(&u2, &v2, k)], &w).unwrap();
    for d in 0..2 {
        assert!((wsum[d] - (wu[d] + k * wv[d])).abs() < 1e-12);
    }
    // with c = 0 BC is linear in the samples; c enters affinely
    let zero = BcState::from_estimate(vec![0.0, 0.0]);
    let (bu, _) = bc_combine(&u0, &[u1.clone(), u2.clone()], &w, &zero).unwrap();
    let (bv, _) = bc_combine(&v0, &[v1.clone(), v2.clone()], &w, &zero).unwrap();
    let (bsum, _) = bc_combine(&add(&u0, &v0, k), &[add(&u1, &v1, k), add(&u2, &v2, k)], &w, &zero).unwrap();
    for d in 0..2 {
        assert!((bsum[d] - (bu[d] + k * bv[d])).abs() < 1e-12);
    }
}
