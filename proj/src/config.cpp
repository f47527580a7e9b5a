#include "talksplat/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <variant>
#include <vector>

#include "talksplat/common.hpp"

namespace talksplat::engine {

namespace {

using Slot = std::variant<int*, double*, bool*, std::uint64_t*>;

struct Entry {
  const char* key;
  Slot slot;
};

// single source of truth for key <-> field binding, shared by the parser,
// the override path and the serializer
std::vector<Entry> entries(RunConfig& c) {
  return {
      {"seed", &c.seed},
      {"mesh.rings", &c.mesh_rings},
      {"mesh.segments", &c.mesh_segments},
      {"mesh.expr_dims", &c.expr_dims},
      {"mesh.subdivide_teeth", &c.subdivide_teeth},
      {"cameras.count", &c.camera_count},
      {"cameras.radius", &c.camera_radius},
      {"cameras.fov_deg", &c.camera_fov_deg},
      {"cameras.holdout", &c.holdout_camera},
      {"image.size", &c.image_size},
      {"synth.sequences", &c.sequences},
      {"synth.frames", &c.frames_per_seq},
      {"synth.feature_rate", &c.feature_rate},
      {"synth.video_rate", &c.video_rate},
      {"synth.audio_dim", &c.audio_dim},
      {"synth.truth_jitter", &c.truth_jitter},
      {"synth.truth_wrinkles", &c.truth_wrinkles},
      {"avatar.latent_dim", &c.latent_dim},
      {"loss.pos", &c.loss.pos},
      {"loss.scaling", &c.loss.scaling},
      {"loss.global", &c.loss.global},
      {"loss.patch", &c.loss.patch},
      {"loss.wrinkle", &c.loss.wrinkle},
      {"loss.dssim", &c.loss.dssim},
      {"features.levels", &c.feature_levels},
      {"features.channels", &c.feature_channels},
      {"features.global_down", &c.global_down},
      {"features.patch_count", &c.patch_count},
      {"features.patch_size", &c.patch_size},
      {"fit.steps", &c.fit_steps},
      {"fit.lr_mu", &c.lr_mu},
      {"fit.lr_quat", &c.lr_quat},
      {"fit.lr_scale", &c.lr_scale},
      {"fit.lr_opacity", &c.lr_opacity},
      {"fit.lr_color", &c.lr_color},
      {"fit.lr_latent", &c.lr_latent},
      {"fit.log_every", &c.log_every},
      {"fit.checkpoint_every", &c.checkpoint_every},
      {"densify.grad_threshold", &c.densify.grad_threshold},
      {"densify.size_threshold", &c.densify.size_threshold},
      {"densify.split_factor", &c.densify.split_factor},
      {"densify.clone_step", &c.densify.clone_step},
      {"densify.interval", &c.densify.interval},
      {"densify.prune_k", &c.densify.prune_k},
      {"densify.start", &c.densify_start},
      {"densify.stop", &c.densify_stop},
      {"seq.width", &c.seq_width},
      {"seq.heads", &c.seq_heads},
      {"seq.ff", &c.seq_ff},
      {"seq.pretrain_steps", &c.pretrain_steps},
      {"seq.warmup_steps", &c.warmup_steps},
      {"seq.alternations", &c.alternations},
      {"seq.lr_motion", &c.lr_motion},
      {"seq.lr_encoder", &c.lr_encoder},
      {"seq.photo_frames", &c.photo_frames},
  };
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

void assign(const Entry& e, const std::string& raw) {
  const std::string v = trim(raw);
  check(!v.empty(), strcat_("config: empty value for '", e.key, "'"));
  std::visit(
      [&](auto* p) {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, bool>) {
          if (v == "true")
            *p = true;
          else if (v == "false")
            *p = false;
          else
            fail(strcat_("config: '", e.key, "' expects true/false, got '", v, "'"));
        } else if constexpr (std::is_same_v<T, double>) {
          std::size_t used = 0;
          *p = std::stod(v, &used);
          check(used == v.size(), strcat_("config: bad number for '", e.key, "': ", v));
        } else {
          long long x = 0;
          const auto res = std::from_chars(v.data(), v.data() + v.size(), x);
          check(res.ec == std::errc() && res.ptr == v.data() + v.size(),
                strcat_("config: bad integer for '", e.key, "': ", v));
          if constexpr (std::is_same_v<T, std::uint64_t>) {
            check(x >= 0, strcat_("config: '", e.key, "' must be non-negative"));
            *p = static_cast<std::uint64_t>(x);
          } else {
            *p = static_cast<int>(x);
          }
        }
      },
      e.slot);
}

}  // namespace

void RunConfig::validate() const {
  check(mesh_rings >= 4 && mesh_segments >= 6, "config: mesh too coarse");
  check(expr_dims >= 1, "config: need at least one expression dim");
  check(camera_count >= 2, "config: need at least two cameras (one held out)");
  check(holdout_camera >= 0 && holdout_camera < camera_count,
        "config: holdout camera out of range");
  check(camera_radius > 1.5, "config: camera ring would intersect the head");
  check(camera_fov_deg > 5 && camera_fov_deg < 170, "config: degenerate fov");
  check(image_size >= 16 && image_size % 16 == 0,
        "config: image size must be a positive multiple of 16");
  check(sequences >= 1 && frames_per_seq >= 2, "config: dataset too small");
  check(feature_rate > 0 && video_rate > 0, "config: rates must be positive");
  check(audio_dim >= 1, "config: audio dim must be positive");
  check(truth_jitter >= 0, "config: negative truth jitter");
  check(latent_dim >= 1, "config: latent dim must be positive");
  loss.validate();
  check(feature_levels >= 1 && feature_channels >= 1, "config: bad feature pyramid");
  check(global_down >= 8 && global_down % 8 == 0 && global_down <= image_size,
        "config: bad global-loss downscale");
  check(patch_count >= 1 && patch_size >= 4 && patch_size <= image_size,
        "config: bad patch sampling");
  check(fit_steps >= 1 && log_every >= 1 && checkpoint_every >= 1,
        "config: fit schedule must be positive");
  for (double lr : {lr_mu, lr_quat, lr_scale, lr_opacity, lr_color, lr_latent,
                    lr_motion, lr_encoder})
    check(lr > 0, "config: learning rates must be positive");
  densify.validate();
  check(densify_start >= 0 && densify_stop >= densify_start,
        "config: densify window inverted");
  check(seq_width >= 2 && seq_heads >= 1 && seq_width % seq_heads == 0,
        "config: sequence width not divisible by heads");
  check(seq_ff >= 1 && pretrain_steps >= 1, "config: bad sequence schedule");
  check(warmup_steps >= 0 && alternations >= 1, "config: bad alternation plan");
  check(photo_frames >= 1 && photo_frames <= frames_per_seq,
        "config: photo frames out of range");
}

RunConfig parse_config(std::istream& is) {
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    check(eq != std::string::npos,
          strcat_("config line ", lineno, ": expected 'key = value'"));
    apply_override(cfg, trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
  }
  cfg.validate();
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream is(path);
  check(static_cast<bool>(is), strcat_("config: cannot open ", path));
  return parse_config(is);
}

void apply_override(RunConfig& cfg, const std::string& key,
                    const std::string& value) {
  for (const auto& e : entries(cfg))
    if (key == e.key) {
      assign(e, value);
      return;
    }
  fail(strcat_("config: unknown key '", key, "'"));
}

std::string serialize_config(const RunConfig& cfg) {
  std::ostringstream os;
  char buf[64];
  for (const auto& e : entries(const_cast<RunConfig&>(cfg))) {
    os << e.key << " = ";
    std::visit(
        [&](auto* p) {
          using T = std::remove_pointer_t<decltype(p)>;
          if constexpr (std::is_same_v<T, bool>) {
            os << (*p ? "true" : "false");
          } else if constexpr (std::is_same_v<T, double>) {
            std::snprintf(buf, sizeof(buf), "%.17g", *p);
            os << buf;
          } else {
            os << *p;
          }
        },
        e.slot);
    os << '\n';
  }
  return os.str();
}

}  // namespace talksplat::engine
