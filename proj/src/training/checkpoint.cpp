#include "physdiff/training/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace physdiff {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

class Writer
{
public:
  template <typename T>
  void put(T v)
  {
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    buf_.append(b, sizeof(T));
  }
  void put_string(std::string const &s)
  {
    put(static_cast<std::uint32_t>(s.size()));
    buf_ += s;
  }
  void put_doubles(double const *p, std::size_t n) { buf_.append(reinterpret_cast<char const *>(p), n * sizeof(double)); }
  std::string const &bytes() const { return buf_; }

private:
  std::string buf_;
};

class Reader
{
public:
  explicit Reader(std::string data)
    : d_(std::move(data))
  {}

  void need(std::size_t n, char const *what) const
  {
    if (d_.size() - pos_ < n) { throw CheckpointError(std::string("checkpoint truncated while reading ") + what); }
  }
  template <typename T>
  T get(char const *what)
  {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, d_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string(char const *what)
  {
    auto const n = get<std::uint32_t>(what);
    need(n, what);
    std::string s = d_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void get_doubles(double *p, std::size_t n, char const *what)
  {
    need(n * sizeof(double), what);
    std::memcpy(p, d_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
  }
  bool done() const { return pos_ == d_.size(); }

private:
  std::string d_;
  std::size_t pos_ = 0;
};

} // namespace

ModelConfig parse_model_config(std::string const &canonical)
{
  std::map<std::string, std::string> kv;
  std::istringstream in(canonical);
  std::string item;
  while (std::getline(in, item, ';')) {
    auto const eq = item.find('=');
    if (eq == std::string::npos) { throw CheckpointError("malformed model config entry '" + item + "'"); }
    kv[item.substr(0, eq)] = item.substr(eq + 1);
  }
  auto take = [&](char const *key) -> std::string const & {
    auto it = kv.find(key);
    if (it == kv.end()) { throw CheckpointError(std::string("model config lacks '") + key + "'"); }
    return it->second;
  };
  ModelConfig c;
  try {
    c.history = std::stoi(take("history"));
    c.horizon = std::stoi(take("horizon"));
    c.channels = std::stol(take("channels"));
    c.height = std::stol(take("height"));
    c.width = std::stol(take("width"));
    c.patch = std::stol(take("patch"));
    c.d_model = std::stol(take("d_model"));
    c.heads = std::stol(take("heads"));
    c.d_embedding = std::stol(take("d_embedding"));
    c.latent_hidden = std::stol(take("latent_hidden"));
    c.enc_blocks = std::stol(take("enc_blocks"));
    c.dec_blocks = std::stol(take("dec_blocks"));
    c.ffn_mult = std::stol(take("ffn_mult"));
    c.steps = std::stoi(take("steps"));
    c.beta_start = std::stod(take("beta_start"));
    c.beta_end = std::stod(take("beta_end"));
    c.ablation = parse_ablation(take("ablation"));
  } catch (std::invalid_argument const &) {
    throw CheckpointError("model config holds a non-numeric value");
  } catch (std::out_of_range const &) {
    throw CheckpointError("model config value out of range");
  }
  if (c.canonical() != canonical) { throw CheckpointError("model config text is not canonical"); }
  return c;
}

void save_checkpoint(std::filesystem::path const &path, PhysDiffModel const &model, NormStats const &stats)
{
  stats.validate();
  Writer w;
  w.put('P');
  w.put('D');
  w.put('C');
  w.put('K');
  w.put(kCheckpointVersion);
  w.put(model.config().hash());
  w.put_string(model.config().canonical());
  for (double v : {stats.wind_mean, stats.wind_std, stats.pres_mean, stats.pres_std, stats.coord_std}) {
    w.put(v);
  }
  w.put(static_cast<std::uint32_t>(stats.env_mean.size()));
  w.put_doubles(stats.env_mean.data(), stats.env_mean.size());
  w.put_doubles(stats.env_std.data(), stats.env_std.size());
  w.put(static_cast<std::uint32_t>(model.params().size()));
  for (auto const &p : model.params()) {
    w.put_string(p->name);
    w.put(static_cast<std::uint32_t>(p->value.rows()));
    w.put(static_cast<std::uint32_t>(p->value.cols()));
    w.put_doubles(p->value.data(), static_cast<std::size_t>(p->value.size()));
  }
  if (path.has_parent_path()) { std::filesystem::create_directories(path.parent_path()); }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) { throw CheckpointError("cannot write checkpoint " + path.string()); }
}

Checkpoint read_checkpoint(std::filesystem::path const &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) { throw CheckpointError("cannot open checkpoint " + path.string()); }
  std::ostringstream ss;
  ss << in.rdbuf();
  Reader r(ss.str());

  char magic[4];
  for (char &c : magic) {
    c = r.get<char>("magic");
  }
  if (std::string(magic, 4) != "PDCK") { throw CheckpointError(path.string() + " is not a checkpoint (bad magic)"); }
  auto const version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  auto const hash = r.get<std::uint64_t>("config hash");
  Checkpoint ck;
  std::string const text = r.get_string("model config");
  if (fnv1a(text) != hash) { throw CheckpointError("checkpoint config hash mismatch"); }
  ck.config = parse_model_config(text);

  NormStats &s = ck.stats;
  s.wind_mean = r.get<double>("norm stats");
  s.wind_std = r.get<double>("norm stats");
  s.pres_mean = r.get<double>("norm stats");
  s.pres_std = r.get<double>("norm stats");
  s.coord_std = r.get<double>("norm stats");
  auto const channels = r.get<std::uint32_t>("norm stats");
  s.env_mean.resize(channels);
  s.env_std.resize(channels);
  r.get_doubles(s.env_mean.data(), channels, "norm stats");
  r.get_doubles(s.env_std.data(), channels, "norm stats");
  try {
    s.validate();
  } catch (ValidationError const &e) {
    throw CheckpointError(std::string("checkpoint norm stats invalid: ") + e.what());
  }

  auto const count = r.get<std::uint32_t>("parameter count");
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.get_string("parameter name");
    auto const rows = r.get<std::uint32_t>("parameter shape");
    auto const cols = r.get<std::uint32_t>("parameter shape");
    Tensor t(rows, cols);
    r.get_doubles(t.data(), static_cast<std::size_t>(rows) * cols, "parameter data");
    ck.params.emplace_back(std::move(name), std::move(t));
  }
  if (!r.done()) { throw CheckpointError("trailing bytes after checkpoint parameters"); }
  return ck;
}

void load_parameters(PhysDiffModel &model, Checkpoint const &ck)
{
  if (ck.config.hash() != model.config().hash()) {
    throw CheckpointError("checkpoint was written for a different model config (" + ck.config.canonical() + ")");
  }
  ParamStore &store = model.params();
  if (ck.params.size() != store.size()) { throw CheckpointError("checkpoint parameter count mismatch"); }
  for (auto const &[name, value] : ck.params) {
    Param *p = store.find(name);
    if (p == nullptr) { throw CheckpointError("checkpoint parameter '" + name + "' unknown to the model"); }
    if (p->value.rows() != value.rows() || p->value.cols() != value.cols()) {
      throw CheckpointError("checkpoint parameter '" + name + "' has shape " + shape_str(value) + ", model expects " +
                            shape_str(p->value));
    }
    p->value = value;
  }
}

std::unique_ptr<PhysDiffModel> load_model(std::filesystem::path const &path, NormStats *stats)
{
  Checkpoint const ck = read_checkpoint(path);
  auto model = std::make_unique<PhysDiffModel>(ck.config, 0);
  load_parameters(*model, ck);
  if (stats != nullptr) { *stats = ck.stats; }
  return model;
}

} // namespace physdiff
