#include "actioncodec/io.hpp"
#include "actioncodec/report.hpp"

#include "doctest.h"

#include <cmath>

using namespace actioncodec;

TEST_CASE("csv parsing keeps columns by name") {
  const auto t = parse_csv("step,loss,tag\n0,1.5,a\n10,0.25,b\n\n");
  CHECK(t.header.size() == 3);
  CHECK(t.rows.size() == 2);
  CHECK(t.column("loss") == std::vector<double>{1.5, 0.25});
  CHECK(std::isnan(t.column("tag")[0]));
  CHECK(t.has("step"));
  CHECK_FALSE(t.has("missing"));
  CHECK_THROWS(t.column("missing"));
  CHECK_THROWS(parse_csv(""));
}

TEST_CASE("svg plot is well formed and skips non-finite points") {
  const Series a{"a", {0, 1, 2}, {0.0, NAN, 2.0}};
  const Series b{"b<1>", {0, 2}, {1, 1}};
  const auto svg = svg_line_plot("t & u", "x", "y", {a, b});
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("b&lt;1&gt;") != std::string::npos);
  CHECK(svg.find("t &amp; u") != std::string::npos);
  CHECK(svg.find("nan") == std::string::npos);
  // deterministic output
  CHECK(svg == svg_line_plot("t & u", "x", "y", {a, b}));
  // degenerate ranges still render
  CHECK(svg_line_plot("empty", "x", "y", {}).find("</svg>") != std::string::npos);
}

TEST_CASE("synth config json round trip") {
  SynthConfig c;
  c.embodiments = {EmbodimentSpec{"arm", 0, 10.0, 7, 1.0}, EmbodimentSpec{"fast", 1, 20.0, 6, 1.0}};
  c.n_tasks = 3;
  c.jitter = 0.05;
  const auto back = synth_config_from_json(to_json(c));
  CHECK(back.embodiments.size() == 2);
  CHECK(back.embodiments[1].action_dim == 6);
  CHECK(back.n_tasks == 3);
  CHECK(back.jitter == 0.05);
  CHECK(to_json(back) == to_json(c));
  auto bad = to_json(c);
  bad["n_tasks"] = 1;
  CHECK_THROWS(synth_config_from_json(bad));
}
