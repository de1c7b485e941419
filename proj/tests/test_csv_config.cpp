#include <catch_amalgamated.hpp>

#include <sstream>

#include "dmte/config.hpp"
#include "dmte/csv.hpp"

using namespace dmte;

TEST_CASE("csv reader reports rows and columns") {
    std::istringstream in("a,b,c\n1,2,3\n\n4, 5 ,6\n");
    csv::Reader reader(in, "t");
    reader.require_columns({"a", "b", "c"});
    std::vector<std::string> fields;
    REQUIRE(reader.next(fields));
    REQUIRE(reader.row_number() == 2);
    REQUIRE(reader.int_field(fields, "a") == 1);
    REQUIRE(reader.next(fields));
    REQUIRE(reader.row_number() == 4);  // blank line skipped but counted
    REQUIRE(fields[1] == "5");          // whitespace trimmed
    REQUIRE_FALSE(reader.next(fields));

    std::istringstream short_row("a,b\n1\n");
    csv::Reader r2(short_row, "t");
    REQUIRE_THROWS_WITH(r2.next(fields), Catch::Matchers::ContainsSubstring("t:2"));

    std::istringstream empty("");
    REQUIRE_THROWS_AS(csv::Reader(empty, "t"), std::runtime_error);
}

TEST_CASE("format_double round-trips") {
    for (double v : {0.0, 1.0, -2.5, 0.1, 1e-13, 123456.789, 60000.0 + 15000.0 * 0.123456789}) {
        const std::string s = csv::format_double(v);
        REQUIRE(std::stod(s) == v);
    }
}

TEST_CASE("config parse, typed getters, and hash") {
    const char* text =
        "# demo\n"
        "[dgp]\n"
        "n_agents = 100\n"
        "seed = 42\n"
        "alpha = -0.5  # trailing comment\n"
        "covariates = normal(0;1), bernoulli(0.5)\n"
        "flag = true\n"
        "[estimate]\n"
        "covariates = income_pm, gender\n";
    std::istringstream in(text);
    const auto config = cfg::Config::parse(in, "demo.cfg");
    REQUIRE(config.get_int("dgp", "n_agents") == 100);
    REQUIRE(config.get_double("dgp", "alpha") == Catch::Approx(-0.5));
    REQUIRE(config.get_bool("dgp", "flag", false));
    REQUIRE(config.get_int("dgp", "missing", 7) == 7);
    REQUIRE_THROWS_WITH(config.get_string("dgp", "missing"),
                        Catch::Matchers::ContainsSubstring("dgp.missing"));
    const auto list = config.get_list("estimate", "covariates");
    REQUIRE(list == std::vector<std::string>{"income_pm", "gender"});
    const auto specs = config.get_list("dgp", "covariates");
    REQUIRE(specs.size() == 2);

    std::istringstream again(text);
    REQUIRE(cfg::Config::parse(again, "demo.cfg").hash() == config.hash());

    std::istringstream other("[dgp]\nn_agents = 101\n");
    REQUIRE(cfg::Config::parse(other, "x").hash() != config.hash());

    std::istringstream bad("[dgp]\nn_agents 100\n");
    REQUIRE_THROWS_WITH(cfg::Config::parse(bad, "bad.cfg"),
                        Catch::Matchers::ContainsSubstring("bad.cfg:2"));
}
