#include "resgrad/metrics.hpp"

#include <stdexcept>

#include "json_io.hpp"
#include "resgrad/run_log.hpp"

namespace resgrad {

std::vector<std::filesystem::path> export_metrics(const TrainHistory& history, const std::filesystem::path& out_dir) {
  if (history.steps.empty()) throw std::invalid_argument("cannot export an empty history");

  std::string steps, tokens = "step,feedback_tokens,stop_events\n", density = "step,component,rho\n", routing;
  for (const auto& r : history.steps) {
    steps += to_json(r).dump() + "\n";
    tokens += std::to_string(r.step) + "," + std::to_string(r.feedback_tokens) + "," + std::to_string(r.stop_events) +
              "\n";
    for (const auto& [id, rho] : r.rho_after)
      density += std::to_string(r.step) + "," + id + "," + std::to_string(rho) + "\n";
  }
  for (const auto& rec : history.routing) routing += to_json(rec).dump() + "\n";

  std::vector<std::filesystem::path> written;
  auto put = [&](const char* name, const std::string& text) {
    const auto path = out_dir / name;
    detail::write_text_file(path, text);
    written.push_back(path);
  };
  put(kHistoryFile, steps);
  put(kTokensFile, tokens);
  put(kDensityFile, density);
  put(kRoutingFile, routing);
  put(kBestPromptsFile, to_json(history.best).dump(2) + "\n");
  return written;
}

}  // namespace resgrad
