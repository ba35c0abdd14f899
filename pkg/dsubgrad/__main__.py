import sys

from dsubgrad.cli import cli


def main():
    sys.exit(cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
