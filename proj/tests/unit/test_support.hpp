#pragma once

#include "iu4rec/config.hpp"
#include "iu4rec/marketplace.hpp"

namespace iu4rec::fixtures {

inline WorldConfig small_world_config() {
  WorldConfig cfg;
  cfg.n_users = 120;
  cfg.n_items = 1500;
  cfg.n_true_units = 40;
  cfg.n_categories = 6;
  cfg.listing_days = 4;
  return cfg;
}

// A pipeline that finishes in seconds: 4 logged days, test on day 4.
inline PipelineConfig small_pipeline_config() {
  PipelineConfig cfg;
  cfg.world = small_world_config();
  cfg.log_days = 4;
  cfg.iu.image_clusters = 40;
  cfg.train_last_day = 3;
  cfg.test_day = 4;
  cfg.sim.first_day = 5;
  cfg.sim.horizon_days = 1;
  return cfg;
}

}  // namespace iu4rec::fixtures
