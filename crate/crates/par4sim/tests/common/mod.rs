#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use par4sim::config::ServiceConfig;
use par4sim::hit::Hit;
use par4sim::pipeline::Pipeline;
use par4sim::service::{LogicalClock, NewHit, Service};
use par4sim::sim::{World, WorldConfig};
use rand_chacha::ChaCha8Rng;

pub fn small_world_config() -> WorldConfig {
    WorldConfig {
        campaign_cps: 40,
        essay_cps: 8,
        candidates_per_cp: 14,
        fillers: 120,
        embedding_dim: 8,
        corpus_sentences: 800,
        ..WorldConfig::default()
    }
}

pub struct Fixture {
    pub world: World,
    pub config: ServiceConfig,
    pub pipeline: Arc<Pipeline>,
}

pub fn fixture(dir: &Path) -> Fixture {
    let world = World::generate(&small_world_config(), 3);
    let mut config = world.write(&dir.join("world")).unwrap();
    config.train.num_trees = 30;
    let pipeline = Arc::new(Pipeline::load(&config).unwrap());
    Fixture { world, config, pipeline }
}

impl Fixture {
    pub fn service(&self) -> Service {
        Service::new(self.config.clone(), self.pipeline.clone()).with_clock(LogicalClock::default())
    }

    /// A HIT with `cps` CP sentences plus one filler sentence.
    pub fn hit(&self, hit_id: &str, iteration: u32, first_cp: usize, cps: usize) -> Hit {
        let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(first_cp as u64);
        let entries: Vec<_> = self.world.campaign[first_cp..first_cp + cps].iter().collect();
        self.world.make_hit(hit_id, iteration, &entries, cps + 1, &mut rng)
    }
}

pub fn new_hit(hit: &Hit) -> NewHit {
    NewHit {
        hit_id: Some(hit.hit_id.clone()),
        iteration: hit.iteration,
        sentences: hit.sentences.clone(),
        spans: hit.gold_spans.clone(),
        assigned_workers: None,
    }
}
