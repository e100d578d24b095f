// Copyright 2026 The DUAL Authors.
// Licensed under the Apache License, Version 2.0

// Named-tensor checkpoint container.
//
// Layout (little-endian):
//   "DCKP" | u32 version=1 | u32 header_len | header JSON
//   u32 tensor_count | per tensor: u32 name_len | name | u32 rows | u32 cols |
//   rows*cols float32, row-major
//
// The header carries {"kind": "span_qa" | "masked_lm", "config": {...},
// "meta": {...}}. Loading rebuilds the parameter structure from the config
// and fills it by tensor name, so tensor order in the file is not significant.

#pragma once

#include <string>

#include "dual/model.hpp"
#include "json.hpp"

namespace dual {

nlohmann::json to_json(const ModelConfig& cfg);
// Missing keys keep their defaults; unknown keys are rejected.
ModelConfig model_config_from_json(const nlohmann::json& j);

std::string encode_checkpoint(const ModelParams<float>& p, const nlohmann::json& meta = nlohmann::json::object());
std::string encode_checkpoint(const MaskedLmParams<float>& p, const nlohmann::json& meta = nlohmann::json::object());

ModelParams<float> decode_model(std::string_view bytes, const std::string& origin,
                                nlohmann::json* meta = nullptr);
MaskedLmParams<float> decode_masked_lm(std::string_view bytes, const std::string& origin,
                                       nlohmann::json* meta = nullptr);

void save_model(const ModelParams<float>& p, const std::string& path,
                const nlohmann::json& meta = nlohmann::json::object());
ModelParams<float> load_model(const std::string& path, nlohmann::json* meta = nullptr);
void save_masked_lm(const MaskedLmParams<float>& p, const std::string& path,
                    const nlohmann::json& meta = nlohmann::json::object());
MaskedLmParams<float> load_masked_lm(const std::string& path, nlohmann::json* meta = nullptr);

}  // namespace dual
