// Copyright 2026 The fedstitch Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedstitch/archive.hpp"

#include <string>
#include <utility>

#include <json.hpp>

#include "fedstitch/errors.hpp"

namespace fedstitch::archive {

namespace {

using nlohmann::json;
using numerics::Matrix;
using numerics::Vector;

constexpr const char* kFormat = "fedstitch-archive";

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      row.push_back(m(r, c));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out.push_back(v(i));
  }
  return out;
}

Matrix matrix_from_json(const json& j, Eigen::Index cols_if_empty = 0) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows == 0 ? cols_if_empty : static_cast<Eigen::Index>(j.at(0).size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j.at(static_cast<std::size_t>(r));
    if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw Error("archive: ragged matrix row " + std::to_string(r));
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
    }
  }
  return m;
}

Vector vector_from_json(const json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

zoo::Activation activation_from(const std::string& s) {
  if (s == "relu") {
    return zoo::Activation::Relu;
  }
  if (s == "identity") {
    return zoo::Activation::Identity;
  }
  throw Error("archive: unknown activation '" + s + "'");
}

json zoo_to_json(const zoo::ModelZoo& z) {
  json models = json::array();
  for (const zoo::PretrainedModel& m : z.models) {
    json blocks = json::array();
    for (const zoo::BlockRef& b : m.blocks) {
      json layers = json::array();
      for (const zoo::Layer& l : b->layers) {
        layers.push_back({{"activation", zoo::to_string(l.activation)},
                          {"weight", matrix_to_json(l.weight)},
                          {"bias", vector_to_json(l.bias)}});
      }
      blocks.push_back({{"id", b->id.value},
                        {"kind", zoo::to_string(b->kind)},
                        {"layer_start", b->layer_start},
                        {"layer_end", b->layer_end},
                        {"layers", std::move(layers)}});
    }
    models.push_back({{"id", m.id.value},
                      {"name", m.name},
                      {"input_dim", m.input_dim},
                      {"num_classes", m.num_classes},
                      {"blocks", std::move(blocks)}});
  }
  json dists = json::array();
  for (const zoo::Distribution& d : z.pretrain_distributions) {
    dists.push_back({{"class_means", matrix_to_json(d.class_means)}, {"noise", d.noise}});
  }
  return {{"world",
           {{"input_dim", z.world.config.input_dim},
            {"num_classes", z.world.config.num_classes},
            {"prototype_scale", z.world.config.prototype_scale},
            {"prototypes", matrix_to_json(z.world.prototypes)}}},
          {"models", std::move(models)},
          {"distributions", std::move(dists)}};
}

zoo::ModelZoo zoo_from_json(const json& j) {
  zoo::ModelZoo z;
  const json& w = j.at("world");
  z.world.config.input_dim = w.at("input_dim").get<int>();
  z.world.config.num_classes = w.at("num_classes").get<int>();
  z.world.config.prototype_scale = w.at("prototype_scale").get<double>();
  z.world.prototypes = matrix_from_json(w.at("prototypes"), z.world.config.input_dim);

  std::uint32_t next_block = 0;
  for (const json& m : j.at("models")) {
    const auto model_id = ModelId{m.at("id").get<std::uint32_t>()};
    if (model_id.value != z.models.size()) {
      throw Error("archive: model ids must be sequential");
    }
    std::vector<zoo::Layer> layers;
    std::vector<zoo::LayerSpan> spans;
    for (const json& b : m.at("blocks")) {
      if (b.at("id").get<std::uint32_t>() != next_block + spans.size()) {
        throw Error("archive: block ids must be sequential");
      }
      spans.emplace_back(b.at("layer_start").get<int>(), b.at("layer_end").get<int>());
      for (const json& l : b.at("layers")) {
        zoo::Layer layer;
        layer.activation = activation_from(l.at("activation").get<std::string>());
        layer.weight = matrix_from_json(l.at("weight"));
        layer.bias = vector_from_json(l.at("bias"));
        layers.push_back(std::move(layer));
      }
    }
    zoo::PretrainedModel model = zoo::split_model(model_id, m.at("name").get<std::string>(),
                                                  std::move(layers), spans,
                                                  m.at("num_classes").get<int>(), next_block);
    if (model.input_dim != m.at("input_dim").get<int>()) {
      throw Error("archive: model " + model.name + " input_dim disagrees with its first layer");
    }
    next_block += static_cast<std::uint32_t>(model.blocks.size());
    z.blocks.insert(z.blocks.end(), model.blocks.begin(), model.blocks.end());
    z.models.push_back(std::move(model));
  }
  for (const json& d : j.at("distributions")) {
    z.pretrain_distributions.push_back(
        zoo::Distribution{matrix_from_json(d.at("class_means"), z.world.config.input_dim),
                          d.at("noise").get<double>()});
  }
  return z;
}

const char* status_name(stitch::Status s) { return s == stitch::Status::Growing ? "growing" : "finished"; }

}  // namespace

std::string write(const Contents& c) {
  json nets = json::array();
  for (const stitch::StitchedNetwork& n : c.networks) {
    json segments = json::array();
    for (const stitch::Segment& s : n.segments) {
      segments.push_back({{"block", s.block->id.value},
                          {"adapter", s.adapter ? matrix_to_json(*s.adapter) : json(nullptr)}});
    }
    json alive = json::array();
    for (BlockId id : n.pool.alive_ids()) {
      alive.push_back(id.value);
    }
    json entry = {{"id", n.id.value},
                  {"parent", n.parent ? json(n.parent->value) : json(nullptr)},
                  {"status", status_name(n.status)},
                  {"reason", stitch::to_string(n.reason)},
                  {"max_depth", n.max_depth},
                  {"pool_alive", std::move(alive)},
                  {"segments", std::move(segments)}};
    if (auto it = c.lineage.find(n.id); it != c.lineage.end()) {
      entry["created_step"] = it->second.created_step;
      entry["votes"] = it->second.votes;
    }
    nets.push_back(std::move(entry));
  }
  json root = {{"format", kFormat},
               {"version", kVersion},
               {"zoo", zoo_to_json(c.zoo)},
               {"networks", std::move(nets)},
               {"weights", c.weights}};
  return root.dump() + "\n";
}

Contents read(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("archive: malformed JSON: ") + e.what());
  }
  try {
    if (root.at("format").get<std::string>() != kFormat) {
      throw Error("archive: not a fedstitch archive");
    }
    if (root.at("version").get<int>() != kVersion) {
      throw Error("archive: unsupported version " + std::to_string(root.at("version").get<int>()));
    }
    Contents c;
    c.zoo = zoo_from_json(root.at("zoo"));
    c.weights = root.at("weights").get<std::vector<double>>();
    for (const json& n : root.at("networks")) {
      stitch::StitchedNetwork net;
      net.id = NetId{n.at("id").get<std::uint32_t>()};
      if (!n.at("parent").is_null()) {
        net.parent = NetId{n.at("parent").get<std::uint32_t>()};
      }
      net.max_depth = n.at("max_depth").get<int>();
      const std::string status = n.at("status").get<std::string>();
      const std::string reason = n.at("reason").get<std::string>();
      net.status = status == "growing" ? stitch::Status::Growing : stitch::Status::Finished;
      if (reason == "terminating_picked") {
        net.reason = stitch::FinishReason::TerminatingPicked;
      } else if (reason == "max_depth") {
        net.reason = stitch::FinishReason::MaxDepth;
      } else if (reason != "growing") {
        throw Error("archive: unknown finish reason '" + reason + "'");
      }
      // Rebuild the pool from the full zoo so entries keep their ids: revive
      // only the recorded blocks.
      stitch::BlockPool pool = stitch::BlockPool::all(c.zoo);
      std::vector<bool> keep(c.zoo.blocks.size(), false);
      for (const json& id : n.at("pool_alive")) {
        keep.at(id.get<std::uint32_t>()) = true;
      }
      for (const zoo::BlockRef& b : c.zoo.blocks) {
        if (!keep[b->id.value]) {
          pool.tombstone(b->id);
        }
      }
      net.pool = std::move(pool);
      int prev_out = 0;
      for (const json& s : n.at("segments")) {
        const zoo::BlockRef& block = c.zoo.block_ref(BlockId{s.at("block").get<std::uint32_t>()});
        stitch::Segment seg{std::nullopt, block};
        if (!s.at("adapter").is_null()) {
          seg.adapter = matrix_from_json(s.at("adapter"), prev_out);
          if (seg.adapter->rows() != block->in_dim || seg.adapter->cols() != prev_out) {
            throw Error("archive: adapter shape does not chain in network " + std::to_string(net.id.value));
          }
        } else if (!net.segments.empty()) {
          throw Error("archive: only the first segment may omit its adapter");
        }
        prev_out = block->out_dim;
        net.segments.push_back(std::move(seg));
      }
      if (n.contains("created_step")) {
        c.lineage[net.id] = server::Lineage{net.id, net.parent, n.at("created_step").get<int>(),
                                            n.at("votes").get<double>()};
      }
      c.networks.push_back(std::move(net));
    }
    return c;
  } catch (const json::exception& e) {
    throw Error(std::string("archive: ") + e.what());
  }
}

}  // namespace fedstitch::archive
