// SPDX-License-Identifier: Apache-2.0
#include "mctk/formats.hpp"

#include <cmath>
#include <fstream>

#include "mctk/container.hpp"

namespace mctk {

namespace {

const Json& field(const Json& j, const char* name, const std::string& ctx) {
  if (!j.is_object()) throw FormatError(ctx + ": expected a JSON object");
  const auto it = j.find(name);
  if (it == j.end()) throw FormatError(ctx + ": missing field '" + name + "'");
  return *it;
}

double number(const Json& j, const std::string& ctx) {
  if (!j.is_number()) throw FormatError(ctx + ": expected a number");
  return j.get<double>();
}

std::size_t count(const Json& j, const std::string& ctx) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0)) {
    throw FormatError(ctx + ": expected a non-negative integer");
  }
  return j.get<std::size_t>();
}

template <std::size_t N>
std::array<float, N> float_array(const Json& j, const std::string& ctx) {
  if (!j.is_array() || j.size() != N) {
    throw FormatError(ctx + ": expected an array of " + std::to_string(N) + " numbers");
  }
  std::array<float, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = static_cast<float>(number(j[i], ctx + "[" + std::to_string(i) + "]"));
  return out;
}

template <std::size_t N>
Json json_array(const std::array<float, N>& a) {
  Json out = Json::array();
  for (const float v : a) out.push_back(v);
  return out;
}

std::string text(const Json& j, const std::string& ctx) {
  if (!j.is_string()) throw FormatError(ctx + ": expected a string");
  return j.get<std::string>();
}

Camera camera_from(const std::array<float, 3>& c) { return {c[0], c[1], c[2]}; }
std::array<float, 3> camera_array(const Camera& c) { return {c.scale, c.tx, c.ty}; }

}  // namespace

void PipelineConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ArgumentError("config: " + msg); };
  if (channels == 0) fail("channels must be >= 1");
  if (patch == 0) fail("patch must be >= 1");
  if (image_size == 0) fail("image_size must be >= 1");
  if (image_size % patch != 0) fail("image_size must be divisible by patch");
  if (!(mask_logit < -1e4)) fail("mask_logit must be below -1e4");
  if (!(keypoint_sigma > 0.0) || !std::isfinite(keypoint_sigma)) fail("keypoint_sigma must be positive");
  if (!(mouth_pad >= 0.0 && mouth_pad <= 1.0)) fail("mouth_pad must be in [0, 1]");
  if (supervision_frames == 0) fail("supervision_frames must be >= 1");
  if (embed_dim < 2 || embed_dim % 2 != 0) fail("embed_dim must be even and >= 2");
}

Json to_json(const PipelineConfig& c) {
  return Json{{"seed", c.seed},
              {"channels", c.channels},
              {"patch", c.patch},
              {"image_size", c.image_size},
              {"audio_half_width", c.audio_half_width},
              {"mask_logit", c.mask_logit},
              {"keypoint_sigma", c.keypoint_sigma},
              {"mouth_pad", c.mouth_pad},
              {"supervision_frames", c.supervision_frames},
              {"embed_dim", c.embed_dim}};
}

PipelineConfig pipeline_config_from_json(const Json& j) {
  const std::string ctx = "config";
  if (!j.is_object()) throw FormatError(ctx + ": expected a JSON object");
  PipelineConfig c;
  for (const auto& [key, value] : j.items()) {
    const std::string where = ctx + "." + key;
    if (key == "seed") {
      if (!value.is_number_unsigned() && !(value.is_number_integer() && value.get<std::int64_t>() >= 0)) {
        throw FormatError(where + ": expected a non-negative integer");
      }
      c.seed = value.get<std::uint64_t>();
    } else if (key == "channels") {
      c.channels = count(value, where);
    } else if (key == "patch") {
      c.patch = count(value, where);
    } else if (key == "image_size") {
      c.image_size = count(value, where);
    } else if (key == "audio_half_width") {
      c.audio_half_width = count(value, where);
    } else if (key == "mask_logit") {
      c.mask_logit = number(value, where);
    } else if (key == "keypoint_sigma") {
      c.keypoint_sigma = number(value, where);
    } else if (key == "mouth_pad") {
      c.mouth_pad = number(value, where);
    } else if (key == "supervision_frames") {
      c.supervision_frames = count(value, where);
    } else if (key == "embed_dim") {
      c.embed_dim = count(value, where);
    } else {
      throw FormatError(ctx + ": unknown field '" + key + "'");
    }
  }
  try {
    c.validate();
  } catch (const ArgumentError& e) {
    throw FormatError(e.what());
  }
  return c;
}

Json to_json(const ParamStream& s) {
  Json frames = Json::array();
  for (const auto& f : s.frames) {
    frames.push_back({{"exp_spectre", json_array(f.exp_spectre)},
                      {"exp_deca_residual", json_array(f.exp_deca_residual)},
                      {"jaw_spectre", json_array(f.jaw_spectre)},
                      {"jaw_deca_residual", json_array(f.jaw_deca_residual)},
                      {"head_rot", json_array(f.head_rot)}});
  }
  return Json{{"fps", s.fps},
              {"identity", {{"shape", json_array(s.shape)}, {"camera", json_array(camera_array(s.camera))}}},
              {"lighting", {{"sh", json_array(s.light)}}},
              {"frames", std::move(frames)}};
}

ParamStream param_stream_from_json(const Json& j) {
  const std::string ctx = "param stream";
  ParamStream s;
  s.fps = number(field(j, "fps", ctx), ctx + ".fps");
  const Json& id = field(j, "identity", ctx);
  s.shape = float_array<kShapeDim>(field(id, "shape", ctx + ".identity"), ctx + ".identity.shape");
  s.camera = camera_from(float_array<3>(field(id, "camera", ctx + ".identity"), ctx + ".identity.camera"));
  s.light = float_array<kLightDim>(field(field(j, "lighting", ctx), "sh", ctx + ".lighting"), ctx + ".lighting.sh");
  const Json& frames = field(j, "frames", ctx);
  if (!frames.is_array() || frames.empty()) throw FormatError(ctx + ".frames: expected a nonempty array");
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const std::string fc = ctx + ".frames[" + std::to_string(t) + "]";
    const Json& f = frames[t];
    StreamFrame sf;
    sf.exp_spectre = float_array<kExpressionDim>(field(f, "exp_spectre", fc), fc + ".exp_spectre");
    sf.exp_deca_residual = float_array<kExpressionDim>(field(f, "exp_deca_residual", fc), fc + ".exp_deca_residual");
    sf.jaw_spectre = float_array<3>(field(f, "jaw_spectre", fc), fc + ".jaw_spectre");
    sf.jaw_deca_residual = float_array<3>(field(f, "jaw_deca_residual", fc), fc + ".jaw_deca_residual");
    sf.head_rot = float_array<3>(field(f, "head_rot", fc), fc + ".head_rot");
    s.frames.push_back(sf);
  }
  try {
    s.validate();
  } catch (const Error& e) {
    throw FormatError(e.what());
  }
  return s;
}

Json to_json(const Recipe& r) {
  Json j{{"identity", r.identity}, {"lighting", r.lighting}, {"head", r.head}, {"mouth", r.mouth}};
  if (r.frame_count) j["frame_count"] = *r.frame_count;
  return j;
}

Recipe recipe_from_json(const Json& j) {
  const std::string ctx = "recipe";
  Recipe r;
  r.identity = text(field(j, "identity", ctx), ctx + ".identity");
  r.lighting = text(field(j, "lighting", ctx), ctx + ".lighting");
  r.head = text(field(j, "head", ctx), ctx + ".head");
  r.mouth = text(field(j, "mouth", ctx), ctx + ".mouth");
  if (j.contains("frame_count") && !j["frame_count"].is_null()) {
    r.frame_count = count(j["frame_count"], ctx + ".frame_count");
  }
  return r;
}

Json to_json(const LandmarkTrack& track) {
  const std::size_t t_count = track.points.dim(0), k = track.points.dim(1);
  Json frames = Json::array();
  for (std::size_t t = 0; t < t_count; ++t) {
    Json pts = Json::array();
    for (std::size_t i = 0; i < k; ++i) pts.push_back({track.points[(t * k + i) * 2], track.points[(t * k + i) * 2 + 1]});
    frames.push_back(std::move(pts));
  }
  return Json{{"frames", std::move(frames)}, {"mouth_indices", track.mouth_indices}};
}

LandmarkTrack landmark_track_from_json(const Json& j) {
  const std::string ctx = "landmarks";
  const Json& frames = field(j, "frames", ctx);
  if (!frames.is_array() || frames.empty()) throw FormatError(ctx + ".frames: expected a nonempty array");
  const std::size_t k = frames[0].is_array() ? frames[0].size() : 0;
  if (k == 0) throw FormatError(ctx + ".frames[0]: expected a nonempty array of [x, y] points");
  std::vector<float> data;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const std::string fc = ctx + ".frames[" + std::to_string(t) + "]";
    if (!frames[t].is_array() || frames[t].size() != k) {
      throw FormatError(fc + ": expected " + std::to_string(k) + " points like frame 0");
    }
    for (std::size_t i = 0; i < k; ++i) {
      const auto xy = float_array<2>(frames[t][i], fc + "[" + std::to_string(i) + "]");
      data.push_back(xy[0]);
      data.push_back(xy[1]);
    }
  }
  LandmarkTrack track{Tensor({frames.size(), k, 2}, std::move(data)), {}};
  const Json& mouth = field(j, "mouth_indices", ctx);
  if (!mouth.is_array()) throw FormatError(ctx + ".mouth_indices: expected an array");
  for (std::size_t i = 0; i < mouth.size(); ++i) {
    track.mouth_indices.push_back(count(mouth[i], ctx + ".mouth_indices[" + std::to_string(i) + "]"));
  }
  try {
    track.validate();
  } catch (const Error& e) {
    throw FormatError(e.what());
  }
  return track;
}

Json head_params_to_json(const std::vector<HeadParams>& frames, double fps) {
  Json out = Json::array();
  for (const auto& p : frames) {
    const auto pose = assemble_pose(p.head_rotation, p.jaw);
    out.push_back({{"shape", json_array(p.shape)},
                   {"expression", json_array(p.expression)},
                   {"jaw", json_array(p.jaw)},
                   {"head_rotation", json_array(p.head_rotation)},
                   {"camera", json_array(camera_array(p.camera))},
                   {"light", json_array(p.light)},
                   {"pose", json_array(pose)}});
  }
  return Json{{"format", "mctk.head_params"}, {"version", 1}, {"fps", fps}, {"frames", std::move(out)}};
}

std::vector<HeadParams> head_params_from_json(const Json& j) {
  const std::string ctx = "head params";
  if (text(field(j, "format", ctx), ctx + ".format") != "mctk.head_params") {
    throw FormatError(ctx + ".format: expected 'mctk.head_params'");
  }
  const Json& frames = field(j, "frames", ctx);
  if (!frames.is_array() || frames.empty()) throw FormatError(ctx + ".frames: expected a nonempty array");
  std::vector<HeadParams> out;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const std::string fc = ctx + ".frames[" + std::to_string(t) + "]";
    const Json& f = frames[t];
    HeadParams p;
    p.shape = float_array<kShapeDim>(field(f, "shape", fc), fc + ".shape");
    p.expression = float_array<kExpressionDim>(field(f, "expression", fc), fc + ".expression");
    p.jaw = float_array<3>(field(f, "jaw", fc), fc + ".jaw");
    p.head_rotation = float_array<3>(field(f, "head_rotation", fc), fc + ".head_rotation");
    p.camera = camera_from(float_array<3>(field(f, "camera", fc), fc + ".camera"));
    p.light = float_array<kLightDim>(field(f, "light", fc), fc + ".light");
    try {
      p.validate();
    } catch (const Error& e) {
      throw FormatError(fc + ": " + e.what());
    }
    out.push_back(p);
  }
  return out;
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open '" + path.string() + "' for reading");
  try {
    return Json::parse(f);
  } catch (const Json::parse_error& e) {
    throw FormatError("'" + path.string() + "' is not valid JSON: " + e.what(), e.byte);
  }
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
  const std::string text = j.dump(2) + "\n";
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void save_head_asset(const std::filesystem::path& path, const HeadAsset& asset) {
  asset.validate();
  if (asset.vertex_count() > (1u << 24)) throw ArgumentError("save_head_asset: too many vertices for f32 indices");
  TensorContainer c(DType::kF32);
  c.add("template", asset.template_vertices);
  Tensor faces({asset.faces.size(), 3});
  for (std::size_t f = 0; f < asset.faces.size(); ++f)
    for (std::size_t k = 0; k < 3; ++k) faces[3 * f + k] = static_cast<float>(asset.faces[f][k]);
  c.add("faces", std::move(faces));
  c.add("shape_basis", asset.shape_basis);
  c.add("expression_basis", asset.expression_basis);
  c.add("jaw_weights", asset.jaw_weights);
  c.add("jaw_pivot", asset.jaw_pivot);
  c.write(path);
}

HeadAsset load_head_asset(const std::filesystem::path& path) {
  const TensorContainer c = TensorContainer::read(path);
  if (c.dtype() != DType::kF32) throw FormatError("head asset must be an f32 container");
  HeadAsset a;
  a.template_vertices = c.get_as<float>("template");
  const Tensor& faces = c.get_as<float>("faces");
  if (faces.rank() != 2 || faces.dim(1) != 3) throw FormatError("head asset faces must be [F x 3]");
  for (std::size_t f = 0; f < faces.dim(0); ++f) {
    Face face{};
    for (std::size_t k = 0; k < 3; ++k) {
      const float v = faces[3 * f + k];
      if (!(v >= 0.0f) || v != std::floor(v) || v > 16777216.0f) {
        throw FormatError("head asset face " + std::to_string(f) + " has a non-integer index");
      }
      face[k] = static_cast<std::uint32_t>(v);
    }
    a.faces.push_back(face);
  }
  a.shape_basis = c.get_as<float>("shape_basis");
  a.expression_basis = c.get_as<float>("expression_basis");
  a.jaw_weights = c.get_as<float>("jaw_weights");
  a.jaw_pivot = c.get_as<float>("jaw_pivot");
  try {
    a.validate();
  } catch (const Error& e) {
    throw FormatError(std::string("invalid head asset: ") + e.what());
  }
  return a;
}

void save_router_config(const std::filesystem::path& stem, const RouterConfig<float>& cfg) {
  cfg.validate();
  Json widths = Json::array();
  widths.push_back(cfg.gate_mlp.in_dim());
  TensorContainer weights(DType::kF32);
  const auto& layers = cfg.gate_mlp.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    widths.push_back(layers[i].out_dim());
    weights.add("layer" + std::to_string(i) + ".weight", layers[i].weight);
    weights.add("layer" + std::to_string(i) + ".bias", layers[i].bias);
  }
  Json order = Json::array();
  for (const auto name : kBranchNames) order.push_back(std::string(name));
  const Json header{{"format", "mctk.router"},
                    {"version", 1},
                    {"channels", cfg.channels},
                    {"mask_logit", cfg.mask_logit},
                    {"branch_order", order},
                    {"gate_input_order", {"u", "t", "reference", "shading", "motion", "audio"}},
                    {"hidden_activation", activation_name(cfg.gate_mlp.hidden_activation())},
                    {"layer_widths", widths}};
  std::filesystem::path json_path = stem, weight_path = stem;
  json_path += ".json";
  weight_path += ".mctk";
  weights.write(weight_path);
  write_json_file(json_path, header);
}

RouterConfig<float> load_router_config(const std::filesystem::path& stem) {
  std::filesystem::path json_path = stem, weight_path = stem;
  json_path += ".json";
  weight_path += ".mctk";
  const Json header = read_json_file(json_path);
  const std::string ctx = "router config";
  if (text(field(header, "format", ctx), ctx + ".format") != "mctk.router") {
    throw FormatError(ctx + ".format: expected 'mctk.router'");
  }
  const Json& order = field(header, "branch_order", ctx);
  if (!order.is_array() || order.size() != kBranchCount) throw FormatError(ctx + ".branch_order: expected 4 names");
  for (std::size_t k = 0; k < kBranchCount; ++k) {
    if (!order[k].is_string() || order[k].get<std::string>() != kBranchNames[k]) {
      throw FormatError(ctx + ".branch_order: expected [reference, shading, motion, audio]");
    }
  }
  RouterConfig<float> cfg;
  cfg.channels = count(field(header, "channels", ctx), ctx + ".channels");
  cfg.mask_logit = number(field(header, "mask_logit", ctx), ctx + ".mask_logit");
  Activation act;
  try {
    act = activation_from_name(text(field(header, "hidden_activation", ctx), ctx + ".hidden_activation"));
  } catch (const ArgumentError& e) {
    throw FormatError(ctx + ".hidden_activation: " + e.what());
  }
  const Json& widths = field(header, "layer_widths", ctx);
  if (!widths.is_array() || widths.size() < 2) throw FormatError(ctx + ".layer_widths: expected >= 2 widths");
  const TensorContainer weights = TensorContainer::read(weight_path);
  std::vector<DenseLayer<float>> layers;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const std::size_t in = count(widths[i], ctx + ".layer_widths"), out = count(widths[i + 1], ctx + ".layer_widths");
    DenseLayer<float> l{weights.get_as<float>("layer" + std::to_string(i) + ".weight"),
                        weights.get_as<float>("layer" + std::to_string(i) + ".bias")};
    if (l.weight.shape() != Shape{out, in} || l.bias.shape() != Shape{out}) {
      throw FormatError(ctx + ": layer " + std::to_string(i) + " weights do not match layer_widths");
    }
    layers.push_back(std::move(l));
  }
  try {
    cfg.gate_mlp = Mlp<float>(std::move(layers), act);
    cfg.validate();
  } catch (const ShapeError& e) {
    throw FormatError(ctx + ": " + e.what());
  }
  return cfg;
}

std::string fnv1a_hex(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xF];
    h >>= 4;
  }
  return out;
}

}  // namespace mctk
