// qoct <mode> --config <path> [--out <dir>] [--sweep key=v1,v2 ...]

#include <CLI11.hpp>

#include <atomic>
#include <cstdio>
#include <iostream>
#include <mutex>
#include <thread>

#include "qoct/run.hpp"

namespace {

std::mutex io_mutex;

void log_line(const std::string& prefix, const std::string& s) {
  std::lock_guard<std::mutex> lock(io_mutex);
  std::cerr << prefix << s << "\n";
}

int report_config_error(const qoct::ConfigError& e, const std::string& out_dir) {
  log_line("qoct: ", e.what());
  if (!out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    try {
      qoct::write_json(std::filesystem::path(out_dir) / "error.json",
                       qoct::error_record(qoct::ExitCode::config, e.what(), e.key(), e.line()));
    } catch (const std::exception&) {
    }
  }
  return static_cast<int>(qoct::ExitCode::config);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"grid-based optimal control of one-electron densities"};
  std::string mode_name, config_path, out_dir;
  std::vector<std::string> sweeps;
  unsigned threads = 0;
  bool quiet = false;
  app.add_option("mode", mode_name, "eigensolve | optimize | propagate | stability")->required();
  app.add_option("--config,-c", config_path, "run configuration")->required()->check(CLI::ExistingFile);
  app.add_option("--out,-o", out_dir, "output directory (overrides output.directory)");
  app.add_option("--sweep", sweeps, "key=v1,v2,...; repeat for a grid of runs");
  app.add_option("--threads,-j", threads, "worker threads for sweeps and guess seeds (0: all cores)");
  app.add_flag("--quiet,-q", quiet, "no progress output");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(qoct::ExitCode::config);
  }

  const auto mode = qoct::parse_mode(mode_name);
  if (!mode) {
    std::cerr << "qoct: unknown mode '" << mode_name << "'\n";
    return static_cast<int>(qoct::ExitCode::config);
  }

  std::vector<qoct::SweepPoint> points;
  std::vector<qoct::RunConfig> configs;
  try {
    std::vector<qoct::SweepAxis> axes;
    for (const auto& s : sweeps) axes.push_back(qoct::parse_sweep(s));
    points = qoct::expand_sweep(axes);
    for (const auto& p : points) {
      qoct::ConfigOverrides ov = p.overrides;
      ov.emplace_back("mode", qoct::to_string(*mode));
      qoct::RunConfig c = qoct::parse_config(config_path, ov);
      if (!out_dir.empty()) c.output_directory = std::filesystem::absolute(out_dir).lexically_normal().string();
      if (!p.label.empty()) c.output_directory = (std::filesystem::path(c.output_directory) / p.label).string();
      configs.push_back(std::move(c));
    }
  } catch (const qoct::ConfigError& e) {
    return report_config_error(e, out_dir);
  }

  std::vector<qoct::ExitCode> codes(configs.size(), qoct::ExitCode::ok);
  auto work = [&](std::size_t k, unsigned inner_threads) {
    qoct::RunOptions o;
    o.threads = inner_threads;
    const std::string prefix = points[k].label.empty() ? "" : "[" + points[k].label + "] ";
    if (!quiet) o.log = [prefix](const std::string& s) { log_line(prefix, s); };
    codes[k] = qoct::run(configs[k], o);
  };
  unsigned workers = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  if (configs.size() == 1 || workers == 1) {
    for (std::size_t k = 0; k < configs.size(); ++k) work(k, threads);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < std::min<std::size_t>(workers, configs.size()); ++w)
      pool.emplace_back([&] {
        for (std::size_t k; (k = next++) < configs.size();) work(k, 1);
      });
    for (auto& t : pool) t.join();
  }
  int rc = 0;
  for (auto c : codes) rc = std::max(rc, static_cast<int>(c));
  return rc;
}
