// SPDX-License-Identifier: Apache-2.0
#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>

#include "mctk/conditioning.hpp"
#include "mctk/container.hpp"
#include "mctk/image_io.hpp"
#include "mctk/liploss.hpp"
#include "mctk/numerics.hpp"
#include "mctk/parallel.hpp"
#include "mctk/rng.hpp"
#include "mctk/shading.hpp"

namespace mctk::cli {

namespace fs = std::filesystem;

namespace {

void require_file(const std::string& path, const std::string& flag) {
  if (!fs::is_regular_file(path)) throw IoError(flag + ": no such file '" + path + "'");
}

void require_dir(const std::string& path, const std::string& flag) {
  if (!fs::is_directory(path)) throw IoError(flag + ": no such directory '" + path + "'");
}

/// First record of an f32 container.
Tensor load_tensor(const std::string& path, const std::string& flag) {
  require_file(path, flag);
  const TensorContainer c = TensorContainer::read(path);
  if (c.size() == 0) throw FormatError(flag + ": container '" + path + "' holds no records");
  if (c.dtype() != DType::kF32) throw FormatError(flag + ": expected an f32 container, got " + dtype_name(c.dtype()));
  return std::get<Tensor>(c.records().front().tensor);
}

void save_tensors(const std::string& path, std::vector<std::pair<std::string, Tensor>> records) {
  TensorContainer c(DType::kF32);
  for (auto& [name, t] : records) c.add(name, std::move(t));
  c.write(path);
}

Json load_json(const std::string& path, const std::string& flag) {
  require_file(path, flag);
  return read_json_file(path);
}

std::vector<fs::path> list_images(const std::string& dir, const std::string& flag) {
  require_dir(dir, flag);
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto ext = entry.path().extension();
    if (entry.is_regular_file() && (ext == ".ppm" || ext == ".pgm")) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw IoError(flag + ": no .ppm/.pgm images in '" + dir + "'");
  return out;
}

/// Images of a directory as [T x 3 x H x W].
Tensor load_frames(const std::string& dir, const std::string& flag) {
  const auto files = list_images(dir, flag);
  std::vector<float> data;
  std::size_t h = 0, w = 0;
  for (const auto& f : files) {
    const PixelImage img = read_pnm(f);
    if (data.empty()) {
      h = img.height;
      w = img.width;
    } else if (img.height != h || img.width != w) {
      throw ShapeError(flag + ": '" + f.string() + "' is " + std::to_string(img.width) + "x" +
                       std::to_string(img.height) + ", expected " + std::to_string(w) + "x" + std::to_string(h));
    }
    const Tensor planar = image_to_planar(img);
    data.insert(data.end(), planar.data().begin(), planar.data().end());
  }
  return Tensor({files.size(), 3, h, w}, std::move(data));
}

std::string numbered(const std::string& stem, std::size_t i, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_%04zu", i);
  return stem + buf + ext;
}

Json shape_json(const Shape& s) { return Json(s); }

Json box_json(const MouthBox& b) { return Json{b.x0, b.y0, b.x1, b.y1}; }

ImageSize image_of(const Tensor& frames) { return {frames.dim(2), frames.dim(3)}; }

void add_gen_asset(CLI::App& app, const PipelineConfig& cfg, Handler& selected) {
  struct Args {
    std::uint64_t seed;
    int subdiv = 3;
    std::string out;
  };
  auto a = std::make_shared<Args>();
  a->seed = cfg.seed;
  auto* sub = app.add_subcommand("gen-asset", "Write a synthetic icosphere head asset (.mcta)");
  sub->add_option("--seed", a->seed, "Seed for the displacement bases");
  sub->add_option("--subdiv", a->subdiv, "Icosphere subdivision level")->check(CLI::Range(0, 4));
  sub->add_option("--out", a->out, "Output asset path")->required();
  sub->callback([&selected, a] {
    selected = [a] {
      const HeadAsset asset = gen_desk_asset(a->seed, a->subdiv);
      save_head_asset(a->out, asset);
      const auto bytes = read_file_bytes(a->out);
      return Outcome{Json{{"command", "gen-asset"},
                          {"out", a->out},
                          {"vertices", asset.vertex_count()},
                          {"faces", asset.faces.size()},
                          {"asset_hash", fnv1a_hex(bytes)}}};
    };
  });
}

void add_fuse(CLI::App& app, const PipelineConfig&, Handler& selected) {
  struct Args {
    std::string speech, head, identity, lighting, out;
    std::size_t frames = 0;
  };
  auto a = std::make_shared<Args>();
  auto* sub = app.add_subcommand("fuse", "Recombine four parameter streams into per-frame head parameters");
  sub->add_option("--speech", a->speech, "ParamStream JSON supplying expression and jaw")->required();
  sub->add_option("--head", a->head, "ParamStream JSON supplying head rotation")->required();
  sub->add_option("--identity", a->identity, "ParamStream JSON supplying shape and camera")->required();
  sub->add_option("--lighting", a->lighting, "ParamStream JSON supplying SH lighting")->required();
  sub->add_option("--frames", a->frames, "Frame count (0 = shorter of speech and head)");
  sub->add_option("--out", a->out, "Output head-params JSON")->required();
  sub->callback([&selected, a] {
    selected = [a] {
      StreamMap streams;
      streams["speech"] = param_stream_from_json(load_json(a->speech, "--speech"));
      streams["head"] = param_stream_from_json(load_json(a->head, "--head"));
      streams["identity"] = param_stream_from_json(load_json(a->identity, "--identity"));
      streams["lighting"] = param_stream_from_json(load_json(a->lighting, "--lighting"));
      Recipe recipe{"identity", "lighting", "head", "speech", std::nullopt};
      if (a->frames > 0) recipe.frame_count = a->frames;
      const auto params = recombine(streams, recipe);
      write_json_file(a->out, head_params_to_json(params, streams["head"].fps));
      return Outcome{Json{{"command", "fuse"}, {"out", a->out}, {"frames", params.size()}, {"recipe", to_json(recipe)}}};
    };
  });
}

void add_render(CLI::App& app, const PipelineConfig& cfg, Handler& selected) {
  struct Args {
    std::string params, asset, mode = "rgb", out_dir;
    std::size_t size;
  };
  auto a = std::make_shared<Args>();
  a->size = cfg.image_size;
  auto* sub = app.add_subcommand("render", "Render SH shading maps for a head-params sequence");
  sub->add_option("--params", a->params, "Head-params JSON from `fuse`")->required();
  sub->add_option("--asset", a->asset, "Head asset (.mcta)")->required();
  sub->add_option("--size", a->size, "Square output size in pixels")->check(CLI::Range(1, 8192));
  sub->add_option("--mode", a->mode, "rgb (P6) or luma (P5)")->check(CLI::IsMember({"rgb", "luma"}));
  sub->add_option("--out-dir", a->out_dir, "Directory for frame_NNNN images and manifest.json")->required();
  sub->callback([&selected, a] {
    selected = [a] {
      const auto params = head_params_from_json(load_json(a->params, "--params"));
      require_file(a->asset, "--asset");
      const HeadAsset asset = load_head_asset(a->asset);
      const std::string asset_hash = fnv1a_hex(read_file_bytes(a->asset));
      const ImageSize size{a->size, a->size};
      const auto frames = render_frames(asset, params, size, threads_from_env());
      fs::create_directories(a->out_dir);
      const bool rgb = a->mode == "rgb";
      Json files = Json::array();
      for (std::size_t t = 0; t < frames.size(); ++t) {
        const std::string name = numbered("frame", t, rgb ? ".ppm" : ".pgm");
        write_pnm(fs::path(a->out_dir) / name, rgb ? rgb_image(frames[t].pixels) : gray_image(luminance(frames[t])));
        files.push_back(name);
      }
      const Json manifest{{"frame_count", frames.size()},
                          {"size", {a->size, a->size}},
                          {"mode", a->mode},
                          {"asset_hash", asset_hash},
                          {"files", files}};
      write_json_file(fs::path(a->out_dir) / "manifest.json", manifest);
      return Outcome{Json{{"command", "render"}, {"out_dir", a->out_dir}, {"frame_count", frames.size()},
                          {"asset_hash", asset_hash}}};
    };
  });
}

void add_route(CLI::App& app, const PipelineConfig& cfg, Handler& selected) {
  struct Args {
    std::string h, out, gates, mask, router, save_router;
    std::array<std::string, kBranchCount> features;
    std::size_t t = 500;
    std::uint64_t seed;
    std::size_t embed_dim;
    double mask_logit;
    bool check = false;
  };
  auto a = std::make_shared<Args>();
  a->seed = cfg.seed;
  a->embed_dim = cfg.embed_dim;
  a->mask_logit = cfg.mask_logit;
  auto* sub = app.add_subcommand("route", "Gate and fuse condition features into a backbone feature");
  sub->set_help_flag("--help", "Print this help message and exit");
  sub->add_option("--h", a->h, "Backbone feature [BT x C x h x w] (MCTK)")->required();
  sub->add_option("--ref", a->features[0], "Reference feature (MCTK)");
  sub->add_option("--shade", a->features[1], "Shading feature (MCTK)");
  sub->add_option("--motion", a->features[2], "Motion feature (MCTK)");
  sub->add_option("--audio", a->features[3], "Audio feature (MCTK)");
  sub->add_option("--mask", a->mask, "4-char 0/1 availability in order ref,shade,motion,audio (default: given files)");
  sub->add_option("--t", a->t, "Diffusion timestep")->check(CLI::Range(1, 1000));
  sub->add_option("--seed", a->seed, "Seed for the gate MLP and timestep projection");
  sub->add_option("--embed-dim", a->embed_dim, "Sinusoidal timestep feature width");
  sub->add_option("--mask-logit", a->mask_logit, "Logit assigned to masked branches");
  sub->add_option("--router", a->router, "Load router weights from <stem>.json/<stem>.mctk instead of seeding");
  sub->add_option("--save-router", a->save_router, "Write the router weights used to <stem>.json/<stem>.mctk");
  sub->add_option("--out", a->out, "Output fused feature (MCTK)")->required();
  sub->add_option("--gates", a->gates, "Output gate stack [BT x 4 x C] (MCTK)");
  sub->add_flag("--check", a->check, "Exit 4 if gates over available branches do not sum to 1 within 1e-6");
  static const std::array<const char*, kBranchCount> flags = {"--ref", "--shade", "--motion", "--audio"};
  sub->callback([&selected, a] {
    selected = [a] {
      const Tensor h = load_tensor(a->h, "--h");
      if (h.rank() != 4) throw ShapeError("--h: expected [BT x C x h x w], got " + shape_to_string(h.shape()));
      BranchMask mask{};
      if (a->mask.empty()) {
        for (std::size_t k = 0; k < kBranchCount; ++k) mask[k] = !a->features[k].empty();
      } else {
        try {
          mask = parse_branch_mask(a->mask);
        } catch (const Error& e) {
          throw ArgumentError(std::string("--mask: ") + e.what());
        }
      }
      ConditionSet<float> conds;
      conds.mask = mask;
      for (std::size_t k = 0; k < kBranchCount; ++k) {
        if (!mask[k]) continue;
        if (a->features[k].empty()) {
          throw ArgumentError(std::string("--mask enables ") + std::string(kBranchNames[k]) + " but " + flags[k] +
                              " was not given");
        }
        conds.features[k] = load_tensor(a->features[k], flags[k]);
      }
      const std::size_t ch = h.dim(1);
      RouterConfig<float> router = a->router.empty() ? RouterConfig<float>::seeded(ch, a->seed)
                                                     : load_router_config(a->router);
      if (a->router.empty()) router.mask_logit = a->mask_logit;
      if (router.channels != ch) {
        throw ShapeError("--router: config has C = " + std::to_string(router.channels) + " but --h has C = " +
                         std::to_string(ch));
      }
      const auto emb = TimestepEmbedding<float>::seeded(a->embed_dim, ch, a->seed + 1);
      const auto out = router_forward(h, conds, a->t, emb, router);

      double worst = 0.0;
      if (!out.gates.fully_masked) {
        for (std::size_t n = 0; n < h.dim(0); ++n) {
          for (std::size_t c = 0; c < ch; ++c) {
            double sum = 0.0;
            for (std::size_t k = 0; k < kBranchCount; ++k)
              if (mask[k]) sum += out.gates.gate(n, k, c);
            worst = std::max(worst, std::abs(sum - 1.0));
          }
        }
      }
      if (!out.fused.all_finite()) throw NumericError("route: fused feature is not finite");

      if (!a->save_router.empty()) save_router_config(a->save_router, router);
      if (!a->gates.empty()) save_tensors(a->gates, {{"gates", out.gates.gates}});
      save_tensors(a->out, {{"fused", out.fused}});
      Json r{{"command", "route"},
             {"out", a->out},
             {"shape", shape_json(h.shape())},
             {"mask", branch_mask_string(mask)},
             {"t", a->t},
             {"fully_masked", out.gates.fully_masked},
             {"max_gate_sum_error", worst}};
      const bool bad = a->check && worst > 1e-6;
      return Outcome{std::move(r), bad ? kNumeric : kOk};
    };
  });
}

void add_audio_window(CLI::App& app, const PipelineConfig& cfg, Handler& selected) {
  struct Args {
    std::string in, out;
    std::size_t m;
  };
  auto a = std::make_shared<Args>();
  a->m = cfg.audio_half_width;
  auto* sub = app.add_subcommand("audio-window", "Stack per-frame audio tokens into edge-replicated windows");
  sub->add_option("--in", a->in, "Audio features [T x L x C_a] or [T x C_a] (MCTK)")->required();
  sub->add_option("--m", a->m, "Half width; window length is 2m + 1");
  sub->add_option("--out", a->out, "Output windows [T x W x L x C_a] (MCTK)")->required();
  sub->callback([&selected, a] {
    selected = [a] {
      Tensor feats = load_tensor(a->in, "--in");
      if (feats.rank() == 2) feats = feats.reshaped({feats.dim(0), 1, feats.dim(1)});
      const AudioWindows w = build_audio_windows(AudioTrack{std::move(feats)}, a->m);
      const Shape shape = w.windows.shape();
      save_tensors(a->out, {{"windows", w.windows}});
      return Outcome{Json{{"command", "audio-window"}, {"out", a->out}, {"window", w.window_length()},
                          {"shape", shape_json(shape)}}};
    };
  });
}

void add_keypoints(CLI::App& app, const PipelineConfig& cfg, Handler& selected) {
  struct Args {
    std::string landmarks, out;
    std::size_t size;
    double sigma;
    bool mouth_only = false;
  };
  auto a = std::make_shared<Args>();
  a->size = cfg.image_size;
  a->sigma = cfg.keypoint_sigma;
  auto* sub = app.add_subcommand("keypoints", "Splat landmark tracks into per-frame keypoint maps");
  sub->add_option("--landmarks", a->landmarks, "Landmark track JSON")->required();
  sub->add_option("--size", a->size, "Square map size in pixels")->check(CLI::Range(1, 8192));
  sub->add_option("--sigma", a->sigma, "Gaussian splat sigma in pixels")->check(CLI::PositiveNumber);
  sub->add_flag("--mouth-only", a->mouth_only, "Splat only the mouth landmarks");
  sub->add_option("--out", a->out, "Output maps [T x 1 x H x W] (MCTK)")->required();
  sub->callback([&selected, a] {
    selected = [a] {
      const LandmarkTrack track = landmark_track_from_json(load_json(a->landmarks, "--landmarks"));
      const std::size_t frames = track.frames(), k = track.points.dim(1);
      const ImageSize size{a->size, a->size};
      Tensor maps({frames, 1, a->size, a->size});
      const std::size_t plane = a->size * a->size;
      parallel_for(frames, threads_from_env(), [&](std::size_t t) {
        std::vector<Keypoint> pts;
        auto take = [&](std::size_t i) {
          pts.push_back({track.points[(t * k + i) * 2], track.points[(t * k + i) * 2 + 1]});
        };
        if (a->mouth_only) {
          for (const auto i : track.mouth_indices) take(i);
        } else {
          for (std::size_t i = 0; i < k; ++i) take(i);
        }
        const Tensor m = rasterize_keypoints(pts, size, a->sigma);
        std::copy(m.data().begin(), m.data().end(), maps.data().begin() + t * plane);
      });
      save_tensors(a->out, {{"keypoints", std::move(maps)}});
      return Outcome{Json{{"command", "keypoints"}, {"out", a->out}, {"frames", frames},
                          {"shape", {frames, 1, a->size, a->size}}}};
    };
  });
}

void add_lipcrop(CLI::App& app, const PipelineConfig& cfg, Handler& selected) {
  struct Args {
    std::string frames, landmarks, out;
    double pad;
    std::size_t size = kLipCropSize;
  };
  auto a = std::make_shared<Args>();
  a->pad = cfg.mouth_pad;
  auto* sub = app.add_subcommand("lipcrop", "Crop the clip-stable mouth box from every frame");
  sub->add_option("--frames", a->frames, "Directory of .ppm/.pgm frames")->required();
  sub->add_option("--landmarks", a->landmarks, "Ground-truth landmark track JSON")->required();
  sub->add_option("--pad", a->pad, "Box growth per side, as a fraction of its extent")->check(CLI::Range(0.0, 1.0));
  sub->add_option("--size", a->size, "Crop output size")->check(CLI::Range(1, 4096));
  sub->add_option("--out", a->out, "Output directory for crop_NNNN.ppm")->required();
  sub->callback([&selected, a] {
    selected = [a] {
      const Tensor frames = load_frames(a->frames, "--frames");
      const LandmarkTrack track = landmark_track_from_json(load_json(a->landmarks, "--landmarks"));
      if (track.frames() != frames.dim(0)) {
        throw ShapeError("--landmarks: " + std::to_string(track.frames()) + " frames but --frames has " +
                         std::to_string(frames.dim(0)));
      }
      const MouthBox box = stable_mouth_bbox(track, a->pad, image_of(frames));
      const Tensor crops = crop_resize(frames, box, a->size, threads_from_env());
      fs::create_directories(a->out);
      const std::size_t vol = 3 * a->size * a->size;
      for (std::size_t t = 0; t < crops.dim(0); ++t) {
        Tensor one({3, a->size, a->size},
                   std::vector<float>(crops.data().begin() + t * vol, crops.data().begin() + (t + 1) * vol));
        write_pnm(fs::path(a->out) / numbered("crop", t, ".ppm"), planar_to_image(one));
      }
      return Outcome{Json{{"command", "lipcrop"}, {"out", a->out}, {"frames", crops.dim(0)}, {"box", box_json(box)}}};
    };
  });
}

void add_liploss(CLI::App& app, const PipelineConfig& cfg, Handler& selected) {
  struct Args {
    std::string pred, gt, landmarks;
    std::size_t tprime;
    std::uint64_t seed;
    double pad;
  };
  auto a = std::make_shared<Args>();
  a->tprime = cfg.supervision_frames;
  a->seed = cfg.seed;
  a->pad = cfg.mouth_pad;
  auto* sub = app.add_subcommand("liploss", "Lip-consistency loss between predicted and ground-truth frames");
  sub->add_option("--pred", a->pred, "Directory of predicted frames")->required();
  sub->add_option("--gt", a->gt, "Directory of ground-truth frames")->required();
  sub->add_option("--tprime", a->tprime, "Number of supervised frames")->check(CLI::PositiveNumber);
  sub->add_option("--seed", a->seed, "Seed for the supervised-frame draw");
  sub->add_option("--landmarks", a->landmarks, "Ground-truth landmarks; when set, frames are mouth-cropped first");
  sub->add_option("--pad", a->pad, "Mouth box growth per side (with --landmarks)")->check(CLI::Range(0.0, 1.0));
  sub->callback([&selected, a] {
    selected = [a] {
      const Tensor pred = load_frames(a->pred, "--pred");
      const Tensor gt = load_frames(a->gt, "--gt");
      if (pred.shape() != gt.shape()) {
        throw ShapeError("--pred " + shape_to_string(pred.shape()) + " and --gt " + shape_to_string(gt.shape()) +
                         " differ");
      }
      const std::size_t frames = gt.dim(0);
      if (a->tprime > frames) {
        throw ArgumentError("--tprime " + std::to_string(a->tprime) + " exceeds the " + std::to_string(frames) +
                            " available frames");
      }
      MouthBox box{0, 0, static_cast<std::int64_t>(gt.dim(3)), static_cast<std::int64_t>(gt.dim(2))};
      if (!a->landmarks.empty()) {
        const LandmarkTrack track = landmark_track_from_json(load_json(a->landmarks, "--landmarks"));
        if (track.frames() != frames) throw ShapeError("--landmarks: frame count does not match --gt");
        box = stable_mouth_bbox(track, a->pad, image_of(gt));
      }
      const auto picked = sample_supervision_frames(frames, a->tprime, a->seed);
      const std::size_t vol = gt.size() / frames;
      auto select = [&](const Tensor& all) {
        Tensor out({picked.size(), gt.dim(1), gt.dim(2), gt.dim(3)});
        for (std::size_t i = 0; i < picked.size(); ++i)
          std::copy_n(all.data().begin() + picked[i] * vol, vol, out.data().begin() + i * vol);
        return out;
      };
      const int threads = threads_from_env();
      const Tensor fp = proxy_lip_features(crop_resize(select(pred), box, kLipCropSize, threads));
      const Tensor fg = proxy_lip_features(crop_resize(select(gt), box, kLipCropSize, threads));
      const double loss = lip_consistency_loss(fp, fg);
      return Outcome{Json{{"command", "liploss"}, {"loss", loss}, {"frames", picked}, {"box", box_json(box)}}};
    };
  });
}

/// Sum of w * fused, evaluated in extended precision so that central
/// differences of it resolve gradients far below the double rounding of the sum.
long double weighted_output(const Tensor64& h, const ConditionSet<double>& conds, const Tensor64& t_emb,
                            const RouterConfig<double>& cfg, const Tensor64& w) {
  ConditionSet<long double> wide;
  wide.mask = conds.mask;
  for (std::size_t k = 0; k < kBranchCount; ++k)
    if (conds.mask[k]) wide.features[k] = conds.features[k].cast<long double>();
  const auto out = router_forward<long double>(h.cast<long double>(), wide, t_emb.cast<long double>(),
                                               cfg.cast<long double>());
  long double acc = 0.0L;
  for (std::size_t i = 0; i < w.size(); ++i) acc += static_cast<long double>(w[i]) * out.fused[i];
  return acc;
}

Tensor64 random_tensor(Shape shape, Rng& rng) {
  Tensor64 t(std::move(shape));
  for (auto& v : t.data()) v = rng.normal();
  return t;
}

void add_gradcheck(CLI::App& app, const PipelineConfig& cfg, Handler& selected) {
  struct Args {
    std::uint64_t seed;
    double eps = 1e-6;
    double tol = 1e-5;
  };
  auto a = std::make_shared<Args>();
  a->seed = cfg.seed;
  auto* sub = app.add_subcommand("gradcheck", "Compare router_backward against central differences (f64)");
  sub->add_option("--seed", a->seed, "Seed for the random router problem");
  sub->add_option("--eps", a->eps, "Finite-difference step")->check(CLI::PositiveNumber);
  sub->add_option("--tol", a->tol, "Maximum allowed relative error")->check(CLI::PositiveNumber);
  sub->callback([&selected, a] {
    selected = [a] {
      Rng rng(a->seed);
      const std::size_t ch = 1 + rng.below(4), bt = 1 + rng.below(2);
      const std::size_t hh = 1 + rng.below(3), ww = 1 + rng.below(3);
      const auto bits = 1 + rng.below(15);
      const Shape shape{bt, ch, hh, ww};
      const auto router = RouterConfig<double>::seeded(ch, a->seed);
      ConditionSet<double> conds;
      for (std::size_t k = 0; k < kBranchCount; ++k) {
        conds.mask[k] = (bits >> k) & 1u;
        conds.features[k] = random_tensor(shape, rng);
      }
      const Tensor64 h = random_tensor(shape, rng);
      const Tensor64 t_emb = random_tensor({ch}, rng);
      const Tensor64 w = random_tensor(shape, rng);

      const auto fwd = router_forward(h, conds, t_emb, router);
      const long double base = weighted_output(h, conds, t_emb, router, w);
      auto objective = [&](const Tensor64& hx, const ConditionSet<double>& cx, const Tensor64& tx,
                           const RouterConfig<double>& rx) {
        return static_cast<double>(weighted_output(hx, cx, tx, rx, w) - base);
      };
      const auto grads = router_backward(router, fwd.tape, w);

      double worst = 0.0;
      std::size_t checked = 0;
      auto track = [&](double err, std::size_t n) {
        worst = std::max(worst, err);
        checked += n;
      };
      track(fd_check([&](const Tensor64& x) { return objective(x, conds, t_emb, router); }, h, grads.grad_h,
                     a->eps),
            h.size());
      for (std::size_t k = 0; k < kBranchCount; ++k) {
        if (!conds.mask[k]) continue;
        track(fd_check(
                  [&](const Tensor64& x) {
                    ConditionSet<double> c = conds;
                    c.features[k] = x;
                    return objective(h, c, t_emb, router);
                  },
                  conds.features[k], grads.grad_features[k], a->eps),
              conds.features[k].size());
      }
      track(fd_check([&](const Tensor64& x) { return objective(h, conds, x, router); }, t_emb,
                     grads.grad_t_emb, a->eps),
            t_emb.size());
      const auto flat = router.gate_mlp.flat_parameters();
      const Tensor64 params({flat.size()}, flat);
      const Tensor64 grad_params({flat.size()}, flatten_layers(grads.grad_gate_mlp));
      track(fd_check(
                [&](const Tensor64& x) {
                  RouterConfig<double> r = router;
                  r.gate_mlp.set_flat_parameters(x.data());
                  return objective(h, conds, t_emb, r);
                },
                params, grad_params, a->eps),
            flat.size());

      const bool pass = worst < a->tol;
      Json r{{"command", "gradcheck"},
             {"seed", a->seed},
             {"channels", ch},
             {"shape", shape_json(shape)},
             {"mask", branch_mask_string(conds.mask)},
             {"checked", checked},
             {"max_rel_error", worst},
             {"pass", pass}};
      return Outcome{std::move(r), pass ? kOk : kNumeric};
    };
  });
}

void add_config(CLI::App& app, const PipelineConfig& cfg, Handler& selected) {
  auto out = std::make_shared<std::string>();
  auto* sub = app.add_subcommand("config", "Print the effective pipeline configuration");
  sub->add_option("--write", *out, "Also write it to this JSON file");
  sub->callback([&selected, &cfg, out] {
    selected = [cfg, out] {
      cfg.validate();
      if (!out->empty()) write_json_file(*out, to_json(cfg));
      return Outcome{Json{{"command", "config"}, {"config", to_json(cfg)}}};
    };
  });
}

}  // namespace

void register_commands(CLI::App& app, const PipelineConfig& cfg, Handler& selected) {
  add_gen_asset(app, cfg, selected);
  add_fuse(app, cfg, selected);
  add_render(app, cfg, selected);
  add_route(app, cfg, selected);
  add_audio_window(app, cfg, selected);
  add_keypoints(app, cfg, selected);
  add_lipcrop(app, cfg, selected);
  add_liploss(app, cfg, selected);
  add_gradcheck(app, cfg, selected);
  add_config(app, cfg, selected);
}

}  // namespace mctk::cli
