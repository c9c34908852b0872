from pqtail.cli import main


main()
