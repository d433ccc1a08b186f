#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dimsheet/model.hpp"
#include "dimsheet/parser.hpp"

namespace testsupport {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

inline std::string atw_path() {
    return std::string(DIMSHEET_SOURCE_DIR) + "/models/atw.dim";
}

inline dimsheet::Model parse_or_throw(const std::string& text) {
    dimsheet::ParseResult result = dimsheet::parse_model(text);
    if (!result.ok()) {
        std::ostringstream msg;
        msg << "parse failed:";
        for (const auto& d : result.diagnostics) {
            msg << "\n  " << d.span.line << ':' << d.span.column << ' ' << d.message;
        }
        throw std::runtime_error(msg.str());
    }
    return *result.model;
}

inline dimsheet::ValidatedModel load_atw() {
    return dimsheet::validate(parse_or_throw(read_file(atw_path())));
}

// The widget model rebuilt with a chosen region and sector count: regional
// and product splits become uniform, added sectors/regions reuse flat
// parameters. Includes an extra aggregate that reduces the Region dimension
// only, which no stock variable does.
inline std::string scaled_widget_model(int sectors, int regions) {
    std::ostringstream out;
    out << "dimension Month: Jan Feb Mar Apr May Jun Jul Aug Sep Oct Nov Dec\n";
    out << "dimension Sector:";
    for (int s = 0; s < sectors; ++s) out << " S" << (s + 1);
    out << "\ndimension Product: Standard Deluxe\n";
    out << "dimension Region:";
    for (int r = 0; r < regions; ++r) out << " R" << (r + 1);
    out << "\n";
    out << "input [Base Price] = 100\n";
    out << "data [Base Price Multiplier] over Product:\n  Standard 1\n  Deluxe 1.45\n";
    out << "data [Unit Production Cost] over Product:\n  Standard 48\n  Deluxe 72\n";
    out << "data [Rebate Percentage] over Sector:\n";
    for (int s = 0; s < sectors; ++s) out << "  S" << (s + 1) << " 0.25\n";
    out << "calc [Sector Price Factor] over Sector = 1 - [Rebate Percentage]\n";
    out << "calc [Sector Base Price] over Sector = [Base Price] * [Sector Price Factor]\n";
    out << "data [DemParA] over Sector:\n";
    for (int s = 0; s < sectors; ++s) out << "  S" << (s + 1) << " 3.5\n";
    out << "data [DemParB] over Sector:\n";
    for (int s = 0; s < sectors; ++s) out << "  S" << (s + 1) << " 22000000000\n";
    out << "calc [Sector Annual Demand Units] over Sector = "
           "[DemParB] / [Sector Base Price] ^ [DemParA]\n";
    out << "data [Unit Delivery Cost] over Region:\n";
    for (int r = 0; r < regions; ++r) out << "  R" << (r + 1) << " 10\n";
    out << "calc [PR Unit Cost] over Product, Region = "
           "[Unit Production Cost] + [Unit Delivery Cost]\n";
    out << "data [Product Distribution per Sector] over Sector, Product:\n";
    for (int s = 0; s < sectors; ++s) {
        out << "  S" << (s + 1) << " Standard 0.5\n  S" << (s + 1) << " Deluxe 0.5\n";
    }
    out << "calc [Annual Sector-Product Unit Sales] over Sector, Product = "
           "[Sector Annual Demand Units] * [Product Distribution per Sector]\n";
    out << "calc [Price] over Sector, Product = [Sector Base Price] * [Base Price Multiplier]\n";
    out << "calc [Annual Sector-Product Sales Amount] over Sector, Product = "
           "[Annual Sector-Product Unit Sales] * [Price]\n";
    out << "data [Region Sales Distribution per Sector] over Sector, Region:\n";
    for (int s = 0; s < sectors; ++s) {
        for (int r = 0; r < regions; ++r) {
            out << "  S" << (s + 1) << " R" << (r + 1) << ' '
                << dimsheet::format_number(1.0 / regions) << "\n";
        }
    }
    out << "data [Monthly Sales Distribution per Sector] over Month, Sector:\n";
    const char* months[] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                            "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
    for (const char* month : months) {
        for (int s = 0; s < sectors; ++s) {
            out << "  " << month << " S" << (s + 1) << ' '
                << dimsheet::format_number(1.0 / 12) << "\n";
        }
    }
    out << "calc [MSP Unit Sales] over Month, Sector, Product = "
           "[Annual Sector-Product Unit Sales] * [Monthly Sales Distribution per Sector]\n";
    out << "calc [MSP Sales Amount] over Month, Sector, Product = "
           "[Annual Sector-Product Sales Amount] * [Monthly Sales Distribution per Sector]\n";
    out << "calc [MSPR Unit Sales] over Month, Sector, Product, Region = "
           "[MSP Unit Sales] * [Region Sales Distribution per Sector]\n";
    out << "calc [MSPR Variable Cost] over Month, Sector, Product, Region = "
           "[MSPR Unit Sales] * [PR Unit Cost]\n";
    out << "calc [Monthly Variable Cost] over Month = SUM([MSPR Variable Cost])\n";
    out << "output [Monthly Unit Sales] over Month = SUM([MSPR Unit Sales])\n";
    out << "calc [Monthly Sales Amount] over Month = SUM([MSP Sales Amount])\n";
    out << "data [Monthly Fixed Cost] = 20000\n";
    out << "calc [Monthly Costs] over Month = [Monthly Fixed Cost] + [Monthly Variable Cost]\n";
    out << "calc [Monthly Profit] over Month = [Monthly Sales Amount] - [Monthly Costs]\n";
    out << "output [MPR Unit Sales] over Month, Product, Region = SUM([MSPR Unit Sales])\n";
    out << "output [MP Unit Sales] over Month, Product = SUM([MSP Unit Sales])\n";
    out << "output [MP Sales Amount] over Month, Product = SUM([MSP Sales Amount])\n";
    out << "output [Total Profit] = SUM([Monthly Profit])\n";
    // The region-reducing aggregate the scale-law checks measure.
    out << "calc [MSP Check] over Month, Sector, Product = SUM([MSPR Unit Sales])\n";
    return out.str();
}

inline dimsheet::ValidatedModel load_scaled(int sectors, int regions) {
    return dimsheet::validate(parse_or_throw(scaled_widget_model(sectors, regions)));
}

}  // namespace testsupport
