#pragma once

#include "cpgan/losses.hpp"
#include "cpgan/networks.hpp"
#include "json.hpp"

// JSON round-trips for configuration structs, used by checkpoints and
// report provenance blocks.

namespace cpgan {

inline void to_json(nlohmann::json& j, const NetConfig& c) {
  j = {{"image_size", c.image_size},
       {"channels", c.channels},
       {"embed_dim", c.embed_dim},
       {"gen_widths", c.gen_widths},
       {"gen_blocks_per_stage", c.gen_blocks_per_stage},
       {"disc_widths", c.disc_widths},
       {"perc_width", c.perc_width},
       {"disc_leaky_slope", c.disc_leaky_slope}};
}

inline void from_json(const nlohmann::json& j, NetConfig& c) {
  j.at("image_size").get_to(c.image_size);
  j.at("channels").get_to(c.channels);
  j.at("embed_dim").get_to(c.embed_dim);
  j.at("gen_widths").get_to(c.gen_widths);
  j.at("gen_blocks_per_stage").get_to(c.gen_blocks_per_stage);
  j.at("disc_widths").get_to(c.disc_widths);
  j.at("perc_width").get_to(c.perc_width);
  j.at("disc_leaky_slope").get_to(c.disc_leaky_slope);
}

inline void to_json(nlohmann::json& j, const LossWeights& w) {
  j = {{"margin", w.margin},
       {"lambda_gan", w.lambda_gan},
       {"lambda_perceptual", w.lambda_perceptual},
       {"lambda_l2", w.lambda_l2}};
}

inline void from_json(const nlohmann::json& j, LossWeights& w) {
  j.at("margin").get_to(w.margin);
  j.at("lambda_gan").get_to(w.lambda_gan);
  j.at("lambda_perceptual").get_to(w.lambda_perceptual);
  j.at("lambda_l2").get_to(w.lambda_l2);
}

}  // namespace cpgan
