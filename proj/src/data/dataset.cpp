#include "physdiff/data/dataset.hpp"

#include "physdiff/data/window.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace physdiff {

namespace {

template <typename T>
T to_le(T v)
{
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::reverse(b, b + sizeof(T));
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

void put_u32(std::ostream &os, std::uint32_t v)
{
  v = to_le(v);
  os.write(reinterpret_cast<char const *>(&v), sizeof v);
}

std::uint32_t get_u32(std::istream &is, std::string const &what)
{
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char *>(&v), sizeof v)) { throw ParseError("env blob: truncated " + what); }
  return to_le(v);
}

} // namespace

void write_env_blob(std::filesystem::path const &path, std::vector<EnvField> const &fields)
{
  std::ofstream os(path, std::ios::binary);
  if (!os) { throw Error("cannot open " + path.string() + " for writing"); }
  Index c = 0, h = 0, w = 0;
  if (!fields.empty()) {
    c = fields.front().channels;
    h = fields.front().height;
    w = fields.front().width;
  }
  os.write("PDEF", 4);
  put_u32(os, kEnvBlobVersion);
  put_u32(os, static_cast<std::uint32_t>(c));
  put_u32(os, static_cast<std::uint32_t>(h));
  put_u32(os, static_cast<std::uint32_t>(w));
  put_u32(os, static_cast<std::uint32_t>(fields.size()));
  std::vector<float> buf(static_cast<std::size_t>(c * h * w));
  for (auto const &f : fields) {
    if (f.channels != c || f.height != h || f.width != w) {
      throw DimensionError("env blob: fields do not share one C x H x W shape");
    }
    for (Index i = 0; i < f.grid->size(); ++i) {
      buf[static_cast<std::size_t>(i)] = to_le(static_cast<float>(f.grid->data()[i]));
    }
    os.write(reinterpret_cast<char const *>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
  if (!os) { throw Error("write failed: " + path.string()); }
}

EnvBlob read_env_blob(std::filesystem::path const &path)
{
  std::ifstream is(path, std::ios::binary);
  if (!is) { throw ParseError("cannot open " + path.string()); }
  char magic[4] = {};
  if (!is.read(magic, 4) || std::memcmp(magic, "PDEF", 4) != 0) {
    throw ParseError("env blob " + path.string() + ": bad magic");
  }
  auto const version = get_u32(is, "version");
  if (version != kEnvBlobVersion) {
    throw ParseError("env blob " + path.string() + ": unsupported version " + std::to_string(version));
  }
  EnvBlob b;
  b.channels = get_u32(is, "C");
  b.height = get_u32(is, "H");
  b.width = get_u32(is, "W");
  auto const count = get_u32(is, "count");
  std::vector<float> buf(static_cast<std::size_t>(b.channels * b.height * b.width));
  for (std::uint32_t k = 0; k < count; ++k) {
    if (!is.read(reinterpret_cast<char *>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)))) {
      throw ParseError("env blob " + path.string() + ": truncated at field " + std::to_string(k));
    }
    Tensor g(b.channels, b.height * b.width);
    for (std::size_t i = 0; i < buf.size(); ++i) {
      g.data()[i] = static_cast<double>(to_le(buf[i]));
    }
    b.grids.push_back(std::move(g));
  }
  return b;
}

std::string read_text_file(std::filesystem::path const &path)
{
  std::ifstream is(path, std::ios::binary);
  if (!is) { throw Error("cannot open " + path.string()); }
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text_file(std::filesystem::path const &path, std::string const &text)
{
  if (path.has_parent_path()) { std::filesystem::create_directories(path.parent_path()); }
  std::ofstream os(path, std::ios::binary);
  if (!os) { throw Error("cannot open " + path.string() + " for writing"); }
  os << text;
}

void save_dataset(std::filesystem::path const &dir, std::vector<Track> const &tracks, nlohmann::json const &manifest)
{
  std::filesystem::create_directories(dir);
  write_text_file(dir / "tracks.csv", write_best_track(tracks));
  std::vector<EnvField> hist, fut;
  for (auto const &t : tracks) {
    hist.insert(hist.end(), t.env_hist.begin(), t.env_hist.end());
    fut.insert(fut.end(), t.env_fut.begin(), t.env_fut.end());
  }
  if (!hist.empty()) {
    write_env_blob(dir / "env_hist.pdef", hist);
    write_env_blob(dir / "env_fut.pdef", fut);
  }
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

std::vector<Track> load_dataset(std::filesystem::path const &dir)
{
  auto tracks = parse_best_track(read_text_file(dir / "tracks.csv"));
  if (!std::filesystem::exists(dir / "env_hist.pdef")) { return tracks; }
  auto const hist = read_env_blob(dir / "env_hist.pdef");
  auto const fut = read_env_blob(dir / "env_fut.pdef");
  std::size_t rows = 0;
  for (auto const &t : tracks) {
    rows += t.obs.size();
  }
  if (hist.grids.size() != rows || fut.grids.size() != rows) {
    throw ParseError("dataset " + dir.string() + ": env blobs hold " + std::to_string(hist.grids.size()) + "/" +
                     std::to_string(fut.grids.size()) + " fields for " + std::to_string(rows) + " track rows");
  }
  std::size_t k = 0;
  for (auto &t : tracks) {
    for (auto const &o : t.obs) {
      t.env_hist.push_back(make_env_field(hist.grids[k], hist.height, hist.width, o.time, FieldKind::historical));
      t.env_fut.push_back(make_env_field(fut.grids[k], fut.height, fut.width, o.time, FieldKind::future));
      ++k;
    }
  }
  return tracks;
}

nlohmann::json synth_manifest(SynthConfig const &cfg, std::uint64_t seed, std::vector<Track> const &tracks,
                              double train_frac, double val_frac)
{
  nlohmann::json j;
  j["generator"] = {
    {"n_tracks", cfg.n_tracks},
    {"min_len", cfg.min_len},
    {"max_len", cfg.max_len},
    {"channels", cfg.channels},
    {"grid", cfg.grid},
    {"heading_noise_deg", cfg.heading_noise_deg},
    {"obs_noise_deg", cfg.obs_noise_deg},
    {"pressure_noise", cfg.pressure_noise},
    {"wind_noise", cfg.wind_noise},
    {"env_noise", cfg.env_noise},
    {"fut_env_noise", cfg.fut_env_noise},
    {"fut_motion_error", cfg.fut_motion_error},
    {"p_env", cfg.p_env},
    {"wp_a", cfg.wp_a},
    {"wp_b", cfg.wp_b},
    {"px_per_deg", cfg.px_per_deg},
    {"blob_sigma", cfg.blob_sigma},
  };
  j["seed"] = seed;
  std::size_t rows = 0;
  for (auto const &t : tracks) {
    rows += t.obs.size();
  }
  j["counts"] = {{"tracks", tracks.size()}, {"observations", rows}};
  auto const split = chronological_split(tracks, train_frac, val_frac);
  auto ids = [](std::vector<Track> const &v) {
    return nlohmann::json{{"tracks", v.size()}, {"first", v.front().id}, {"last", v.back().id},
                          {"first_year", v.front().year}, {"last_year", v.back().year}};
  };
  j["split"] = {{"train_frac", train_frac},
                {"val_frac", val_frac},
                {"train", ids(split.train)},
                {"val", ids(split.val)},
                {"test", ids(split.test)}};
  return j;
}

} // namespace physdiff
