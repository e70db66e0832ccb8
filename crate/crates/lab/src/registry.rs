//! The experiment registry. Ordering is stable and is the listing order.

use crate::error::{LabError, LabResult};
use crate::experiments::{adversarial as adv, basics, capacity, cover, nml};
use crate::run::{Ctx, Outcome};

pub type RunFn = fn(&Ctx) -> LabResult<Outcome>;

pub struct Experiment {
    pub id: &'static str,
    /// Label of the statement the verdicts refer to.
    pub anchor: &'static str,
    pub summary: &'static str,
    /// Needs a master seed.
    pub stochastic: bool,
    /// Keys accepted under `[measures]`.
    pub measures: &'static [&'static str],
    /// Keys accepted under `[params]`.
    pub params: &'static [&'static str],
    /// Commented default config.
    pub template: &'static str,
    pub run: RunFn,
}

impl std::fmt::Debug for Experiment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Experiment").field("id", &self.id).field("anchor", &self.anchor).finish_non_exhaustive()
    }
}

macro_rules! template {
    ($id:literal) => {
        include_str!(concat!("../configs/", $id, ".toml"))
    };
}

static REGISTRY: &[Experiment] = &[
    Experiment {
        id: "mixture-bound",
        anchor: "eq:tric",
        summary: "-log nu(x) + log mu_k(x) <= -log w_k for every component and sequence",
        stochastic: true,
        measures: &["mixtures"],
        params: &["horizon", "sample_horizon", "samples"],
        template: template!("mixture-bound"),
        run: basics::mixture_bound,
    },
    Experiment {
        id: "disc-adversarial",
        anchor: "th:disc",
        summary: "greedy adversarial sequence costs every predictor at least log2|X| bits per step",
        stochastic: false,
        measures: &["predictors"],
        params: &["max_horizon"],
        template: template!("disc-adversarial"),
        run: basics::disc_adversarial,
    },
    Experiment {
        id: "loss-series",
        anchor: "eq:kl",
        summary: "per-step KL, absolute distance and their running averages along one path",
        stochastic: true,
        measures: &["mu", "rho"],
        params: &["n", "path"],
        template: template!("loss-series"),
        run: basics::loss_series_exp,
    },
    Experiment {
        id: "tv-profile",
        anchor: "th:01",
        summary: "conditional total variation over the next m symbols, nondecreasing in m",
        stochastic: false,
        measures: &["mu", "rho"],
        params: &["prefixes"],
        template: template!("tv-profile"),
        run: basics::tv_profile_exp,
    },
    Experiment {
        id: "dinf-markov",
        anchor: "th:mark",
        summary: "d_inf between two finite-memory chains against the context bound",
        stochastic: false,
        measures: &["mu1", "mu2"],
        params: &[],
        template: template!("dinf-markov"),
        run: basics::dinf_markov,
    },
    Experiment {
        id: "pinsker-sweep",
        anchor: "th:da",
        summary: "a_t^2 <= 2 ln2 delta_t on random measure pairs, zero violations",
        stochastic: true,
        measures: &[],
        params: &["pairs", "steps", "max_alphabet"],
        template: template!("pinsker-sweep"),
        run: basics::pinsker_sweep,
    },
    Experiment {
        id: "nml-negative",
        anchor: "eq:nml",
        summary: "NML conditionals give a negative conditional divergence, log2(3/4)",
        stochastic: false,
        measures: &[],
        params: &["table_horizon"],
        template: template!("nml-negative"),
        run: nml::nml_negative,
    },
    Experiment {
        id: "nml-bound",
        anchor: "th:ml",
        summary: "exact per-step loss of rho_c on Bernoulli data against its bound, c_n <= n+1",
        stochastic: false,
        measures: &[],
        params: &["ps", "component_factor"],
        template: template!("nml-bound"),
        run: nml::nml_bound,
    },
    Experiment {
        id: "capacity",
        anchor: "eq:cc",
        summary: "capacity of the Bernoulli grid restricted to X^n, with convergence gap",
        stochastic: false,
        measures: &[],
        params: &["r", "tol", "max_iters"],
        template: template!("capacity"),
        run: capacity::capacity,
    },
    Experiment {
        id: "capacity-minimax",
        anchor: "th:cc",
        summary: "capacity solver against brute-force minimax and maximin over priors",
        stochastic: false,
        measures: &["class"],
        params: &["grid_steps", "grid_rounds", "tol", "agreement"],
        template: template!("capacity-minimax"),
        run: capacity::capacity_minimax,
    },
    Experiment {
        id: "capacity-predictor",
        anchor: "eq:ccb",
        summary: "worst-case loss of rho_C against (C_n + 1 + 2 log n + log w)/n",
        stochastic: false,
        measures: &["class"],
        params: &["max_horizon", "tol"],
        template: template!("capacity-predictor"),
        run: capacity::capacity_predictor,
    },
    Experiment {
        id: "cover-certify",
        anchor: "th:main",
        summary: "greedy cover mixture: exact slack against the analytic finite-n bound",
        stochastic: false,
        measures: &["class", "rho"],
        params: &[],
        template: template!("cover-certify"),
        run: cover::cover_certify,
    },
    Experiment {
        id: "lb",
        anchor: "th:lb",
        summary: "Bayesian over the S-enumeration loses -log(1-W_s) to Bernoulli(1/2)",
        stochastic: false,
        measures: &[],
        params: &["n", "prior"],
        template: template!("lb"),
        run: adv::lb,
    },
    Experiment {
        id: "suboptimal-bayes",
        anchor: "th:not",
        summary: "Bayesian priors lose about twice the entropy where the tripartite predictor does not",
        stochastic: true,
        measures: &[],
        params: &["p", "n", "support", "seeds", "t0", "max_attempts"],
        template: template!("suboptimal-bayes"),
        run: adv::suboptimal,
    },
    Experiment {
        id: "stationary-plus",
        anchor: "th:stno",
        summary: "-log mu_x(x_1..n) <= -log pi_1 + 2 log(n+1) for the climb-or-reset chain",
        stochastic: true,
        measures: &[],
        params: &["sequences", "truncation_probe"],
        template: template!("stationary-plus"),
        run: adv::stationary_plus,
    },
    Experiment {
        id: "hidden-markov",
        anchor: "th:stno1",
        summary: "hidden chain assigns t_1..n probability about (2/3)^n",
        stochastic: true,
        measures: &[],
        params: &["n", "tolerance"],
        template: template!("hidden-markov"),
        run: adv::hidden_markov,
    },
    Experiment {
        id: "laplace-dominance",
        anchor: "prop:Laplace",
        summary: "Laplace dominates every Bernoulli measure with coefficient 1/(n+1)",
        stochastic: false,
        measures: &[],
        params: &["horizon", "points"],
        template: template!("laplace-dominance"),
        run: adv::laplace_dominance,
    },
    Experiment {
        id: "dominance-consequence",
        anchor: "th:dom",
        summary: "a dominance certificate and the prediction guarantee it implies",
        stochastic: false,
        measures: &["rho", "mu"],
        params: &["coefficients", "coefficient_value", "horizon", "consequence", "n", "eps", "paths"],
        template: template!("dominance-consequence"),
        run: adv::dominance_consequence,
    },
    Experiment {
        id: "contamination-kl",
        anchor: "th:expaverklsum",
        summary: "mixing in any chi costs at most one bit of expected cumulative KL",
        stochastic: false,
        measures: &["mu", "rho", "chi"],
        params: &[],
        template: template!("contamination-kl"),
        run: adv::contamination_kl,
    },
    Experiment {
        id: "nosum-ad",
        anchor: "th:nosumad",
        summary: "contaminated climbing predictor: closed-form conditionals dip at n_k",
        stochastic: false,
        measures: &[],
        params: &["k_max"],
        template: template!("nosum-ad"),
        run: adv::nosum_ad_exp,
    },
    Experiment {
        id: "nosum-avad",
        anchor: "th:nosumavad",
        summary: "after the killer strikes, average absolute distance stays above 1/4",
        stochastic: true,
        measures: &[],
        params: &["horizon", "paths"],
        template: template!("nosum-avad"),
        run: adv::nosum_avad_exp,
    },
    Experiment {
        id: "weights-matter",
        anchor: "s:exvc0",
        summary: "geometric weights lose n-1 bits where quadratic weights lose O(log n)",
        stochastic: false,
        measures: &[],
        params: &["n"],
        template: template!("weights-matter"),
        run: adv::weights_matter_exp,
    },
    Experiment {
        id: "middle-case",
        anchor: "th:comp",
        summary: "experts lose log2(3/2) per step while candidate predictors lose at least 1",
        stochastic: true,
        measures: &[],
        params: &["n", "experts"],
        template: template!("middle-case"),
        run: adv::middle_case_exp,
    },
    Experiment {
        id: "nodom",
        anchor: "th:nodom",
        summary: "sparse half-probability steps: dominance holds yet delta and a spike to 1",
        stochastic: false,
        measures: &[],
        params: &["k_max", "horizon"],
        template: template!("nodom"),
        run: adv::nodom_exp,
    },
];

#[must_use]
pub fn registry() -> &'static [Experiment] {
    REGISTRY
}

pub fn find(id: &str) -> LabResult<&'static Experiment> {
    REGISTRY.iter().find(|e| e.id == id).ok_or_else(|| LabError::UnknownExperiment(id.to_string()))
}
