//! Walks the model-selection questionnaire for a few study situations.
//!
//!     cargo run --example advisor

use boat::advisor::{advise, Answers};

fn main() {
    let no = Some(false);
    let yes = Some(true);
    let studies = [
        ("A/B test on a web page", Answers { randomizable: yes, ..Default::default() }),
        (
            "fleet retrofit, drivers opted in",
            Answers { randomizable: no, covariates_known: yes, multiple_covariates: yes, ..Default::default() },
        ),
        (
            "discount for customers above a spend threshold",
            Answers {
                randomizable: no,
                covariates_known: yes,
                multiple_covariates: no,
                continuous_dominant_covariate: yes,
                ..Default::default()
            },
        ),
        (
            "software update rolled out to one region",
            Answers { randomizable: no, covariates_known: no, latent_inference_needed: no, ..Default::default() },
        ),
        (
            "effect of driver skill",
            Answers { randomizable: no, covariates_known: no, latent_inference_needed: yes, ..Default::default() },
        ),
        ("nothing answered yet", Answers::default()),
    ];
    for (study, answers) in studies {
        match advise(&answers) {
            Ok(r) => println!("{study}: {r}\n    {}", r.rationale()),
            Err(e) => println!("{study}: {e}"),
        }
    }
}
