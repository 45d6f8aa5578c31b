#include "physdiff/config.hpp"

#include "physdiff/data/dataset.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <array>
#include <charconv>
#include <functional>
#include <sstream>

namespace physdiff {

namespace {

template <typename T>
T parse_number(std::string const &key, std::string const &text)
{
  T v{};
  auto const [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError("config key " + key + ": cannot parse '" + text + "'");
  }
  return v;
}

bool parse_bool(std::string const &key, std::string const &text)
{
  if (text == "true" || text == "1" || text == "yes" || text == "on") { return true; }
  if (text == "false" || text == "0" || text == "no" || text == "off") { return false; }
  throw ConfigError("config key " + key + ": expected true or false, got '" + text + "'");
}

template <typename T>
std::string format_number(T v)
{
  std::array<char, 64> buf{};
  auto const [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

struct Binding
{
  std::function<void(RunConfig &, std::string const &, std::string const &)> set;
  std::function<std::string(RunConfig const &)> get;
};

template <typename T, typename Access>
Binding number(Access access)
{
  return {[access](RunConfig &c, std::string const &key, std::string const &v) {
            access(c) = parse_number<T>(key, v);
          },
          [access](RunConfig const &c) { return format_number<T>(access(const_cast<RunConfig &>(c))); }};
}

template <typename Access>
Binding boolean(Access access)
{
  return {[access](RunConfig &c, std::string const &key, std::string const &v) { access(c) = parse_bool(key, v); },
          [access](RunConfig const &c) { return std::string(access(const_cast<RunConfig &>(c)) ? "true" : "false"); }};
}

using Table = std::vector<std::pair<std::string, Binding>>;

Table const &table()
{
  static Table const t = [] {
    Table b;
    auto add = [&b](std::string key, Binding binding) { b.emplace_back(std::move(key), std::move(binding)); };
    using R = RunConfig;

    add("run.seed", number<std::uint64_t>([](R &c) -> std::uint64_t & { return c.seed; }));
    add("run.data", Binding{[](R &c, std::string const &, std::string const &v) { c.data_dir = v; },
                            [](R const &c) { return c.data_dir; }});

    add("data.n_tracks", number<int>([](R &c) -> int & { return c.synth.n_tracks; }));
    add("data.min_len", number<int>([](R &c) -> int & { return c.synth.min_len; }));
    add("data.max_len", number<int>([](R &c) -> int & { return c.synth.max_len; }));
    // the model's env grid always follows the generator
    add("data.channels", Binding{[](R &c, std::string const &k, std::string const &v) {
                                   c.synth.channels = c.model.channels = parse_number<Index>(k, v);
                                 },
                                 [](R const &c) { return format_number(c.synth.channels); }});
    add("data.grid", Binding{[](R &c, std::string const &k, std::string const &v) {
                               c.synth.grid = c.model.height = c.model.width = parse_number<Index>(k, v);
                             },
                             [](R const &c) { return format_number(c.synth.grid); }});
    add("data.heading_noise_deg", number<double>([](R &c) -> double & { return c.synth.heading_noise_deg; }));
    add("data.obs_noise_deg", number<double>([](R &c) -> double & { return c.synth.obs_noise_deg; }));
    add("data.pressure_noise_hpa", number<double>([](R &c) -> double & { return c.synth.pressure_noise; }));
    add("data.wind_noise_ms", number<double>([](R &c) -> double & { return c.synth.wind_noise; }));
    add("data.env_noise", number<double>([](R &c) -> double & { return c.synth.env_noise; }));
    add("data.fut_env_noise", number<double>([](R &c) -> double & { return c.synth.fut_env_noise; }));
    add("data.fut_motion_error_deg", number<double>([](R &c) -> double & { return c.synth.fut_motion_error; }));
    add("data.p_env_hpa", number<double>([](R &c) -> double & { return c.synth.p_env; }));
    add("data.wp_a", number<double>([](R &c) -> double & { return c.synth.wp_a; }));
    add("data.wp_b", number<double>([](R &c) -> double & { return c.synth.wp_b; }));
    add("data.px_per_deg", number<double>([](R &c) -> double & { return c.synth.px_per_deg; }));
    add("data.blob_sigma_px", number<double>([](R &c) -> double & { return c.synth.blob_sigma; }));
    add("data.train_frac", number<double>([](R &c) -> double & { return c.train_frac; }));
    add("data.val_frac", number<double>([](R &c) -> double & { return c.val_frac; }));

    add("model.history", number<int>([](R &c) -> int & { return c.model.history; }));
    add("model.horizon", number<int>([](R &c) -> int & { return c.model.horizon; }));
    add("model.patch", number<Index>([](R &c) -> Index & { return c.model.patch; }));
    add("model.d_model", number<Index>([](R &c) -> Index & { return c.model.d_model; }));
    add("model.heads", number<Index>([](R &c) -> Index & { return c.model.heads; }));
    add("model.d_embedding", number<Index>([](R &c) -> Index & { return c.model.d_embedding; }));
    add("model.latent_hidden", number<Index>([](R &c) -> Index & { return c.model.latent_hidden; }));
    add("model.enc_blocks", number<Index>([](R &c) -> Index & { return c.model.enc_blocks; }));
    add("model.dec_blocks", number<Index>([](R &c) -> Index & { return c.model.dec_blocks; }));
    add("model.ffn_mult", number<Index>([](R &c) -> Index & { return c.model.ffn_mult; }));
    add("model.ablation", Binding{[](R &c, std::string const &, std::string const &v) {
                                    c.model.ablation = parse_ablation(v);
                                  },
                                  [](R const &c) { return to_string(c.model.ablation); }});

    add("diffusion.steps", number<int>([](R &c) -> int & { return c.model.steps; }));
    add("diffusion.beta_start", number<double>([](R &c) -> double & { return c.model.beta_start; }));
    add("diffusion.beta_end", number<double>([](R &c) -> double & { return c.model.beta_end; }));

    add("train.epochs", number<int>([](R &c) -> int & { return c.train.epochs; }));
    add("train.batch_size", number<int>([](R &c) -> int & { return c.train.batch_size; }));
    add("train.lr", number<double>([](R &c) -> double & { return c.train.lr; }));
    add("train.lr_min", number<double>([](R &c) -> double & { return c.train.lr_min; }));
    add("train.max_steps", number<long>([](R &c) -> long & { return c.train.max_steps; }));
    add("train.clip_norm", number<double>([](R &c) -> double & { return c.train.clip_norm; }));
    add("train.routing", boolean([](R &c) -> bool & { return c.train.routing; }));
    add("train.latent_stop_grad", boolean([](R &c) -> bool & { return c.train.latent_stop_grad; }));

    add("eval.members", number<std::size_t>([](R &c) -> std::size_t & { return c.members; }));
    add("eval.leads", number<int>([](R &c) -> int & { return c.leads; }));
    return b;
  }();
  return t;
}

Binding const &lookup(std::string const &key)
{
  for (auto const &[k, b] : table()) {
    if (k == key) { return b; }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

} // namespace

TrainConfig RunConfig::desk_train_defaults()
{
  TrainConfig t;
  t.batch_size = 16;
  t.lr = 3e-3;
  t.max_steps = 2000;
  t.epochs = 1000;
  return t;
}

void RunConfig::set(std::string const &key, std::string const &value) { lookup(key).set(*this, key, value); }

std::string RunConfig::get(std::string const &key) const { return lookup(key).get(*this); }

void RunConfig::apply_override(std::string const &assignment)
{
  auto const eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form section.key=value");
  }
  set(assignment.substr(0, eq), assignment.substr(eq + 1));
}

std::vector<std::string> RunConfig::keys()
{
  std::vector<std::string> out;
  for (auto const &[k, b] : table()) {
    out.push_back(k);
  }
  return out;
}

void RunConfig::validate() const
{
  synth.validate();
  model.validate();
  train.validate();
  if (synth.channels != model.channels || synth.grid != model.height) {
    throw ConfigError("model env grid " + std::to_string(model.channels) + "x" + std::to_string(model.height) +
                      " does not match data " + std::to_string(synth.channels) + "x" + std::to_string(synth.grid));
  }
  if (!(train_frac > 0 && val_frac > 0 && train_frac + val_frac < 1)) {
    throw ConfigError("split fractions must be positive with train_frac + val_frac < 1");
  }
  if (members < 1) { throw ConfigError("eval.members must be >= 1"); }
  if (leads < 0 || leads > model.horizon) { throw ConfigError("eval.leads must lie in [0, horizon]"); }
}

std::string RunConfig::to_ini() const
{
  std::ostringstream os;
  std::string section;
  for (auto const &[k, b] : table()) {
    auto const dot = k.find('.');
    std::string const sec = k.substr(0, dot);
    if (sec != section) {
      os << (section.empty() ? "" : "\n") << '[' << sec << "]\n";
      section = sec;
    }
    os << k.substr(dot + 1) << " = " << b.get(*this) << '\n';
  }
  return os.str();
}

RunConfig parse_run_config(std::string const &ini_text)
{
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(ini_text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (pt::ini_parser_error const &e) {
    throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
  }
  RunConfig cfg;
  for (auto const &[section, body] : tree) {
    if (body.empty()) { throw ConfigError("config key '" + section + "' is outside any section"); }
    for (auto const &[key, value] : body) {
      cfg.set(section + "." + key, value.get_value<std::string>());
    }
  }
  return cfg;
}

RunConfig load_run_config(std::filesystem::path const &path) { return parse_run_config(read_text_file(path)); }

} // namespace physdiff
