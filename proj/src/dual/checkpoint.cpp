// Copyright 2026 The DUAL Authors.
// Licensed under the Apache License, Version 2.0

#include "dual/checkpoint.hpp"

#include <cmath>
#include <map>
#include <set>

#include "dual/binio.hpp"
#include "dual/error.hpp"

namespace dual {
namespace {

constexpr char kMagic[] = "DCKP";
constexpr std::uint32_t kVersion = 1;

template <typename P>
std::string encode(const P& p, const char* kind, const nlohmann::json& meta) {
  check_finite(p, "checkpoint");
  nlohmann::json header = {{"kind", kind}, {"config", to_json(p.config)}, {"meta", meta}};
  binio::Writer w;
  w.magic(kMagic);
  w.u32(kVersion);
  w.str(header.dump());
  std::uint32_t count = 0;
  for_each_tensor(p, [&](const std::string&, const auto&, bool) { ++count; });
  w.u32(count);
  for_each_tensor(p, [&](const std::string& name, const auto& t, bool) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(t.rows()));
    w.u32(static_cast<std::uint32_t>(t.cols()));
    w.bytes(t.data(), static_cast<std::size_t>(t.size()) * sizeof(float));
  });
  return w.buffer();
}

template <typename P>
P decode(std::string_view bytes, const std::string& origin, const char* kind,
         nlohmann::json* meta, P (*make)(const ModelConfig&, std::uint64_t)) {
  binio::Reader r(bytes, origin);
  if (r.magic(4) != kMagic) fail(ErrorCode::kBadMagic, origin + ": not a checkpoint");
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    fail(ErrorCode::kVersionMismatch,
         origin + ": checkpoint version " + std::to_string(version) + " unsupported");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.str());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kSchema, origin + ": malformed checkpoint header: " + e.what());
  }
  if (!header.contains("kind") || header["kind"] != kind)
    fail(ErrorCode::kSchema, origin + ": checkpoint kind is not '" + std::string(kind) + "'");
  if (!header.contains("config")) fail(ErrorCode::kSchema, origin + ": checkpoint has no config");
  P p = make(model_config_from_json(header["config"]), 0);
  if (meta) *meta = header.value("meta", nlohmann::json::object());

  std::map<std::string, std::pair<float*, std::pair<Eigen::Index, Eigen::Index>>> slots;
  for_each_tensor(p, [&](const std::string& name, auto& t, bool) {
    slots[name] = {t.data(), {t.rows(), t.cols()}};
  });
  std::set<std::string> seen;
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.str();
    const std::uint32_t rows = r.u32(), cols = r.u32();
    auto it = slots.find(name);
    if (it == slots.end()) fail(ErrorCode::kSchema, origin + ": unexpected tensor '" + name + "'");
    if (it->second.second.first != rows || it->second.second.second != cols)
      fail(ErrorCode::kDimMismatch, origin + ": tensor '" + name + "' has shape " +
                                        std::to_string(rows) + "x" + std::to_string(cols));
    r.take(it->second.first, static_cast<std::size_t>(rows) * cols * sizeof(float));
    seen.insert(name);
  }
  for (const auto& [name, slot] : slots)
    if (!seen.contains(name)) fail(ErrorCode::kSchema, origin + ": missing tensor '" + name + "'");
  check_finite(p, origin);
  return p;
}

}  // namespace

nlohmann::json to_json(const ModelConfig& c) {
  return {{"num_units", c.num_units}, {"max_len", c.max_len},       {"layers", c.layers},
          {"model_dim", c.model_dim}, {"heads", c.heads},           {"ffn_dim", c.ffn_dim},
          {"local_window", c.local_window}, {"dropout", c.dropout}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorCode::kSchema, "model config must be a JSON object");
  ModelConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "num_units") c.num_units = value.get<std::uint32_t>();
      else if (key == "max_len") c.max_len = value.get<std::uint32_t>();
      else if (key == "layers") c.layers = value.get<std::uint32_t>();
      else if (key == "model_dim") c.model_dim = value.get<std::uint32_t>();
      else if (key == "heads") c.heads = value.get<std::uint32_t>();
      else if (key == "ffn_dim") c.ffn_dim = value.get<std::uint32_t>();
      else if (key == "local_window") c.local_window = value.get<std::uint32_t>();
      else if (key == "dropout") c.dropout = value.get<double>();
      else fail(ErrorCode::kSchema, "unknown model config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kSchema, std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string encode_checkpoint(const ModelParams<float>& p, const nlohmann::json& meta) {
  return encode(p, "span_qa", meta);
}

std::string encode_checkpoint(const MaskedLmParams<float>& p, const nlohmann::json& meta) {
  return encode(p, "masked_lm", meta);
}

ModelParams<float> decode_model(std::string_view bytes, const std::string& origin,
                                nlohmann::json* meta) {
  return decode<ModelParams<float>>(bytes, origin, "span_qa", meta, &init_model<float>);
}

MaskedLmParams<float> decode_masked_lm(std::string_view bytes, const std::string& origin,
                                       nlohmann::json* meta) {
  return decode<MaskedLmParams<float>>(bytes, origin, "masked_lm", meta, &init_masked_lm<float>);
}

void save_model(const ModelParams<float>& p, const std::string& path, const nlohmann::json& meta) {
  binio::write_file_atomic(path, encode_checkpoint(p, meta));
}

ModelParams<float> load_model(const std::string& path, nlohmann::json* meta) {
  return decode_model(binio::read_file(path), path, meta);
}

void save_masked_lm(const MaskedLmParams<float>& p, const std::string& path,
                    const nlohmann::json& meta) {
  binio::write_file_atomic(path, encode_checkpoint(p, meta));
}

MaskedLmParams<float> load_masked_lm(const std::string& path, nlohmann::json* meta) {
  return decode_masked_lm(binio::read_file(path), path, meta);
}

}  // namespace dual
